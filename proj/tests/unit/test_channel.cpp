#include <doctest.h>

#include <cmath>

#include "metalink/channel.hpp"
#include "metalink/errors.hpp"
#include "metalink/oracles/reference.hpp"

using namespace metalink;
using namespace metalink::channel;
using metalink::oracles::mean_se;

TEST_CASE("stationary taps have variance 1/L") {
  for (std::size_t L : {1u, 3u}) {
    CAPTURE(L);
    Rng rng = make_rng(10, {L});
    std::vector<std::vector<double>> power(L, std::vector<double>(100000));
    for (std::size_t d = 0; d < 100000; ++d) {
      const auto taps = draw_stationary_taps(L, rng);
      REQUIRE(taps.size() == L);
      for (std::size_t l = 0; l < L; ++l) power[l][d] = std::norm(taps[l]);
    }
    const double tol = L == 1 ? 0.02 : 0.01;
    for (std::size_t l = 0; l < L; ++l) {
      CHECK(std::abs(mean_se(power[l]).mean - 1.0 / static_cast<double>(L)) < tol);
    }
  }
  Rng rng = make_rng(11);
  CHECK(draw_stationary_taps(2, rng).size() == 2);
  CHECK_THROWS_AS(draw_stationary_taps(0, rng), ArgumentError);
}

TEST_CASE("advance follows the frame-boundary rule") {
  Rng rng = make_rng(12);
  SUBCASE("rho = 1 keeps the taps across boundaries") {
    auto s = make_state(3, 1.0, 4, 0.1, 1.0, rng);
    const auto start = s.taps;
    for (int i = 0; i < 12; ++i) s = advance(std::move(s), rng);
    CHECK(s.taps == start);
    CHECK(s.block_index == 12);
  }
  SUBCASE("rho = 0 replaces the taps with the innovation") {
    auto s = make_state(2, 0.0, 1, 0.1, 1.0, rng);
    Rng copy = rng;
    const auto innovation = draw_stationary_taps(2, copy);
    s = advance(std::move(s), rng);
    CHECK(s.taps == innovation);
  }
  SUBCASE("taps are bit-identical inside a frame") {
    auto s = make_state(3, 0.5, 5, 0.1, 1.0, rng);
    const auto start = s.taps;
    for (int i = 0; i < 4; ++i) {
      s = advance(std::move(s), rng);
      CHECK(s.taps == start);
    }
    s = advance(std::move(s), rng);
    CHECK(s.taps != start);
  }
}

TEST_CASE("make_state validates its arguments") {
  Rng rng = make_rng(13);
  CHECK_THROWS_AS(make_state(0, 0.5, 4, 0.1, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(make_state(2, 1.5, 4, 0.1, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(make_state(2, -0.1, 4, 0.1, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(make_state(2, 0.5, 0, 0.1, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(make_state(2, 0.5, 4, -1.0, 1.0, rng), ArgumentError);
  CHECK_THROWS_AS(make_state(2, 0.5, 4, 0.1, 0.0, rng), ArgumentError);
}

TEST_CASE("transmit: noiseless examples") {
  Rng rng = make_rng(14);
  ChannelState s;
  s.n0 = 0.0;
  SUBCASE("identity channel") {
    s.taps = {Complex(1.0, 0.0)};
    const ComplexVec x{Complex(0.3, -1.0), Complex(-0.7, 0.2)};
    CHECK(transmit(s, x, rng) == x);
  }
  SUBCASE("null channel") {
    s.taps = {Complex(0.0, 0.0), Complex(0.0, 0.0)};
    const auto y = transmit(s, ComplexVec{Complex(1.0, 0.0), Complex(2.0, 1.0)}, rng);
    REQUIRE(y.size() == 3);
    for (const auto& v : y) CHECK(v == Complex(0.0, 0.0));
  }
  SUBCASE("impulse input returns the taps") {
    const Complex a(0.5, -0.2), b(-1.1, 0.4);
    s.taps = {a, b};
    const auto y = transmit(s, ComplexVec{Complex(1.0, 0.0), Complex(0.0, 0.0)}, rng);
    CHECK(y == ComplexVec{a, b, Complex(0.0, 0.0)});
  }
  SUBCASE("matches a direct convolution, length n + L - 1") {
    s.taps = draw_stationary_taps(3, rng);
    const ComplexVec x{Complex(1.0, 2.0), Complex(-0.5, 0.1), Complex(0.0, 1.0), Complex(2.0, 0.0)};
    const auto y = transmit(s, x, rng);
    REQUIRE(y.size() == x.size() + 2);
    const auto ref = oracles::ref_convolve(s.taps, x);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-15);
  }
  CHECK_THROWS_AS(transmit(s, ComplexVec{}, rng), ArgumentError);
}

TEST_CASE("noise has variance n0 per complex sample") {
  Rng rng = make_rng(15);
  ChannelState s;
  s.taps = {Complex(0.0, 0.0)};
  s.n0 = 0.3;
  std::vector<double> power;
  for (int i = 0; i < 20000; ++i) {
    for (const auto& v : transmit(s, ComplexVec(4, Complex(1.0, 0.0)), rng)) {
      power.push_back(std::norm(v));
    }
  }
  const auto est = mean_se(power);
  CHECK(std::abs(est.mean - 0.3) < 3.0 * est.se);
}

TEST_CASE("transmit is reproducible for equal seeds") {
  Rng a = make_rng(16), b = make_rng(16);
  auto sa = make_state(3, 0.9, 2, 0.1, 1.0, a);
  auto sb = make_state(3, 0.9, 2, 0.1, 1.0, b);
  const ComplexVec x(4, Complex(1.0, 0.0));
  CHECK(transmit(sa, x, a) == transmit(sb, x, b));
}

TEST_CASE("snr_to_n0 examples") {
  CHECK(snr_to_n0(10.0, 1.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(snr_to_n0(0.0, 1.0) == 1.0);
  CHECK(snr_to_n0(10.0, 2.0) == doctest::Approx(0.2).epsilon(1e-15));
}

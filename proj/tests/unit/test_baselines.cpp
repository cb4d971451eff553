#include <doctest.h>

#include <cmath>

#include <Eigen/Dense>

#include "metalink/baselines.hpp"
#include "metalink/errors.hpp"
#include "metalink/oracles/reference.hpp"

using namespace metalink;
using namespace metalink::baselines;
using metalink::oracles::mean_se;

namespace {

ComplexVec add_noise(ComplexVec y, double n0, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(n0 / 2.0));
  for (auto& v : y) {
    const double re = normal(rng);
    v += Complex(re, normal(rng));
  }
  return y;
}

double sq_error(const ComplexVec& a, const ComplexVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
  return s;
}

}  // namespace

TEST_CASE("BPSK mapping examples") {
  const auto zero = bpsk_encode(0, 4, 4, 1.0);
  for (const auto& v : zero) CHECK(v == Complex(1.0, 0.0));
  for (int m = 0; m < 16; ++m) {
    const auto x = bpsk_encode(m, 4, 4, 2.0);
    const auto c = bpsk_encode(15 - m, 4, 4, 2.0);
    double power = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(c[i] == -x[i]);
      CHECK(x[i].imag() == 0.0);
      power += std::norm(x[i]);
    }
    CHECK(power / 4.0 == doctest::Approx(2.0).epsilon(1e-15));
  }
  // MSB first: m = 0b1000 flips the first channel use.
  CHECK(bpsk_encode(8, 4, 4, 1.0)[0] == Complex(-1.0, 0.0));
  CHECK(bpsk_encode(8, 4, 4, 1.0)[3] == Complex(1.0, 0.0));
  CHECK_THROWS_AS(bpsk_encode(0, 4, 3, 1.0), ArgumentError);
  CHECK_THROWS_AS(bpsk_encode(16, 4, 4, 1.0), ArgumentError);
  CHECK(bpsk_codebook(3, 3, 1.0).size() == 8);
}

TEST_CASE("convolution matrix is Toeplitz and reproduces the convolution") {
  Rng rng = make_rng(50);
  const ComplexVec x{Complex(1.0, 2.0), Complex(-0.5, 0.3), Complex(0.7, -1.0)};
  const auto X = convolution_matrix(x, 2);
  REQUIRE(X.rows == 4);
  REQUIRE(X.cols == 2);
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.cols; ++j) {
      const auto d = static_cast<long>(i) - static_cast<long>(j);
      CHECK(X(i, j) == (d >= 0 && d < 3 ? x[static_cast<std::size_t>(d)] : Complex(0.0, 0.0)));
    }
  }
  const auto h = channel::draw_stationary_taps(2, rng);
  const auto y = oracles::ref_convolve(h, x);
  for (std::size_t i = 0; i < X.rows; ++i) {
    const Complex xh = X(i, 0) * h[0] + X(i, 1) * h[1];
    CHECK(std::abs(xh - y[i]) < 1e-15);
  }
}

TEST_CASE("MMSE estimate examples") {
  Rng rng = make_rng(51);
  SUBCASE("noiseless recovery") {
    const auto h = channel::draw_stationary_taps(3, rng);
    const auto x = bpsk_encode(5, 4, 4, 1.0);
    const PilotPair pilot{x, oracles::ref_convolve(h, x)};
    const auto est = mmse_estimate(std::span(&pilot, 1), 1e-12, 3);
    CHECK(std::sqrt(sq_error(est, h)) <= 1e-6);
  }
  SUBCASE("zero-energy pilots return the prior mean") {
    const PilotPair pilot{ComplexVec(4), add_noise(ComplexVec(5), 0.1, rng)};
    for (const auto& v : mmse_estimate(std::span(&pilot, 1), 0.1, 2)) CHECK(v == Complex(0.0, 0.0));
  }
  SUBCASE("scalar closed form") {
    const double n0 = 0.3;
    const Complex h(0.4, -0.9);
    std::vector<PilotPair> pilots;
    Complex total{};
    for (int p = 0; p < 3; ++p) {
      const ComplexVec y = add_noise({h}, n0, rng);
      total += y[0];
      pilots.push_back({{Complex(1.0, 0.0)}, y});
      const auto est = mmse_estimate(pilots, n0, 1);
      const double P = static_cast<double>(pilots.size());
      const Complex expect = total / P * (P / (P + n0));
      CHECK(std::abs(est[0] - expect) < 1e-14);
    }
  }
  CHECK_THROWS_AS(mmse_estimate(std::span<const PilotPair>{}, 0.1, 2), ArgumentError);
}

TEST_CASE("MMSE error matches the posterior covariance trace") {
  // E||h_hat - h||^2 = tr((sum X^H X / n0 + L I)^-1) for fixed pilots.
  Rng rng = make_rng(52);
  const std::size_t L = 2;
  const double n0 = 0.2;
  const std::vector<ComplexVec> xs{bpsk_encode(3, 4, 4, 1.0), bpsk_encode(9, 4, 4, 1.0)};
  Eigen::MatrixXcd gram = Eigen::MatrixXcd::Identity(L, L) * static_cast<double>(L);
  for (const auto& x : xs) {
    const auto X = convolution_matrix(x, L);
    Eigen::MatrixXcd m(X.rows, X.cols);
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (std::size_t j = 0; j < X.cols; ++j) m(i, j) = X(i, j);
    }
    gram += m.adjoint() * m / n0;
  }
  const double trace = gram.inverse().trace().real();

  std::vector<double> err(20000);
  for (auto& e : err) {
    const auto h = channel::draw_stationary_taps(L, rng);
    std::vector<PilotPair> pilots;
    for (const auto& x : xs) pilots.push_back({x, add_noise(oracles::ref_convolve(h, x), n0, rng)});
    e = sq_error(mmse_estimate(pilots, n0, L), h);
  }
  const auto est = mean_se(err);
  CHECK(std::abs(est.mean - trace) < 3.0 * est.se);
}

TEST_CASE("MMSE is no worse than least squares") {
  Rng rng = make_rng(53);
  const std::size_t L = 3;
  const double n0 = 0.5;
  std::vector<double> diff(10000);
  for (auto& d : diff) {
    const auto h = channel::draw_stationary_taps(L, rng);
    const auto x = bpsk_encode(static_cast<int>(rng() % 16), 4, 4, 1.0);
    const PilotPair pilot{x, add_noise(oracles::ref_convolve(h, x), n0, rng)};
    d = sq_error(ls_estimate(std::span(&pilot, 1), L), h) -
        sq_error(mmse_estimate(std::span(&pilot, 1), n0, L), h);
  }
  const auto est = mean_se(diff);
  CHECK(est.mean > -3.0 * est.se);
  CHECK(est.mean > 0.0);
}

TEST_CASE("ML decoding") {
  Rng rng = make_rng(54);
  const auto book = bpsk_codebook(4, 4, 1.0);
  SUBCASE("noiseless with the true channel is the identity") {
    const auto h = channel::draw_stationary_taps(3, rng);
    for (int m = 0; m < 16; ++m) {
      CHECK(ml_decode(h, oracles::ref_convolve(h, book[static_cast<std::size_t>(m)]), book) == m);
    }
  }
  SUBCASE("all-zero observation ties resolve to the lowest index") {
    const ComplexVec h{Complex(1.0, 0.0)};
    CHECK(ml_decode(h, ComplexVec(4), book) == 0);
  }
  SUBCASE("analytic block error at 20 dB and at 4 dB") {
    const ComplexVec h{Complex(1.0, 0.0)};
    const auto book8 = bpsk_codebook(8, 8, 1.0);
    const MlDetector det(h, book8);
    for (const double db : {20.0, 4.0}) {
      const double n0 = channel::snr_to_n0(db, 1.0);
      std::size_t errors = 0;
      const std::size_t trials = 10000;
      for (std::size_t t = 0; t < trials; ++t) {
        const int m = static_cast<int>(rng() % 256);
        errors += det.decode(add_noise(book8[static_cast<std::size_t>(m)], n0, rng)) != m;
      }
      const double p = bpsk_block_error(db, 8);
      const double se = std::sqrt(std::max(p * (1.0 - p), 1e-300) / trials);
      CHECK(std::abs(static_cast<double>(errors) / trials - p) <= std::max(3.0 * se, 1e-12));
    }
  }
  SUBCASE("the true channel beats a perturbed estimate") {
    const double n0 = channel::snr_to_n0(10.0, 1.0);
    std::vector<double> diff(10000);
    for (auto& d : diff) {
      const auto h = channel::draw_stationary_taps(2, rng);
      ComplexVec eps = channel::draw_stationary_taps(2, rng);
      double norm = 0.0;
      for (const auto& e : eps) norm += std::norm(e);
      ComplexVec off = h;
      for (std::size_t l = 0; l < 2; ++l) off[l] += eps[l] * (0.3 / std::sqrt(norm));
      const int m = static_cast<int>(rng() % 16);
      const auto y = add_noise(oracles::ref_convolve(h, book[static_cast<std::size_t>(m)]), n0, rng);
      d = static_cast<double>(ml_decode(off, y, book) != m) -
          static_cast<double>(ml_decode(h, y, book) != m);
    }
    const auto est = mean_se(diff);
    CHECK(est.mean > -3.0 * est.se);
  }
  CHECK_THROWS_AS(ml_decode(ComplexVec{Complex(1.0, 0.0)}, ComplexVec(4), std::vector<ComplexVec>{}),
                  ArgumentError);
  CHECK_THROWS_AS(ml_decode(ComplexVec{Complex(1.0, 0.0)}, ComplexVec(3), book), ShapeError);
}

TEST_CASE("analytic BPSK helpers agree with the independent oracle") {
  for (const double db : {0.0, 4.0, 10.0}) {
    CHECK(bpsk_block_error(db, 8) == doctest::Approx(oracles::bpsk_block_error(db, 8)).epsilon(1e-14));
  }
  CHECK(q_function(0.0) == 0.5);
}

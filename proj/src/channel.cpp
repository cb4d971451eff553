#include "metalink/channel.hpp"

#include <cmath>

#include "metalink/errors.hpp"

namespace metalink::channel {

ComplexVec draw_stationary_taps(std::size_t num_taps, Rng& rng) {
  if (num_taps == 0) throw ArgumentError("channel needs at least one tap");
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 / static_cast<double>(num_taps)));
  ComplexVec taps(num_taps);
  for (auto& t : taps) {
    const double re = normal(rng);
    const double im = normal(rng);
    t = Complex(re, im);
  }
  return taps;
}

ChannelState make_state(std::size_t num_taps, double rho, std::size_t frame_len,
                        double n0, double es, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ArgumentError("rho must lie in [0, 1]");
  if (frame_len == 0) throw ArgumentError("frame length must be positive");
  if (!(n0 >= 0.0)) throw ArgumentError("noise variance must be non-negative");
  if (!(es > 0.0)) throw ArgumentError("symbol energy must be positive");
  ChannelState s;
  s.taps = draw_stationary_taps(num_taps, rng);
  s.rho = rho;
  s.frame_len = frame_len;
  s.n0 = n0;
  s.es = es;
  return s;
}

ChannelState advance(ChannelState state, Rng& rng) {
  ++state.block_index;
  if (state.block_index % state.frame_len == 0) {
    const ComplexVec innovation = draw_stationary_taps(state.taps.size(), rng);
    const double keep = state.rho;
    const double fresh = std::sqrt(std::max(0.0, 1.0 - keep * keep));
    for (std::size_t l = 0; l < state.taps.size(); ++l) {
      state.taps[l] = keep * state.taps[l] + fresh * innovation[l];
    }
  }
  return state;
}

ComplexVec convolve(std::span<const Complex> taps, std::span<const Complex> x) {
  if (taps.empty() || x.empty()) return {};
  ComplexVec y(x.size() + taps.size() - 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t l = 0; l < taps.size(); ++l) y[i + l] += taps[l] * x[i];
  }
  return y;
}

ComplexVec transmit(const ChannelState& state, std::span<const Complex> x, Rng& rng) {
  if (x.empty()) throw ArgumentError("transmit: empty codeword");
  if (state.taps.empty()) throw ArgumentError("transmit: channel has no taps");
  ComplexVec y = convolve(state.taps, x);
  if (state.n0 > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(state.n0 / 2.0));
    for (auto& s : y) {
      const double re = normal(rng);
      const double im = normal(rng);
      s += Complex(re, im);
    }
  }
  return y;
}

double snr_to_n0(double es_n0_db, double es) {
  return es / std::pow(10.0, es_n0_db / 10.0);
}

}  // namespace metalink::channel

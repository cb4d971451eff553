#pragma once

// Block-fading multipath channel: each block sees y = h * x + w with L complex
// taps held constant over a frame of T blocks and evolving across frames as a
// first-order autoregressive Rayleigh process.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metalink/random.hpp"

namespace metalink {

using Complex = std::complex<double>;
using ComplexVec = std::vector<Complex>;

namespace channel {

struct ChannelState {
  ComplexVec taps;
  double rho = 0.0;             // frame-to-frame correlation, in [0, 1]
  std::size_t frame_len = 1;    // blocks per frame, T
  std::uint64_t block_index = 0;
  double n0 = 1.0;              // noise variance per complex sample
  double es = 1.0;              // symbol energy

  std::size_t num_taps() const noexcept { return taps.size(); }
};

// Fresh state with a stationary tap draw. Validates rho, frame_len, n0, es.
ChannelState make_state(std::size_t num_taps, double rho, std::size_t frame_len,
                        double n0, double es, Rng& rng);

// L i.i.d. CN(0, 1/L) taps.
ComplexVec draw_stationary_taps(std::size_t num_taps, Rng& rng);

// Moves to the next block. When the new block index is a multiple of
// frame_len the taps become rho * taps + sqrt(1 - rho^2) * innovation.
ChannelState advance(ChannelState state, Rng& rng);

// Full linear convolution of taps with x plus CN(0, n0) noise; the result
// has x.size() + L - 1 samples.
ComplexVec transmit(const ChannelState& state, std::span<const Complex> x, Rng& rng);

// Noise-free convolution, length x.size() + taps.size() - 1.
ComplexVec convolve(std::span<const Complex> taps, std::span<const Complex> x);

// N0 = Es / 10^(dB / 10).
double snr_to_n0(double es_n0_db, double es);

}  // namespace channel
}  // namespace metalink

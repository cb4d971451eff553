#pragma once

// Classical reference receiver chain: BPSK mapping, Bayesian MMSE channel
// estimation from pilot blocks, and exhaustive maximum-likelihood block
// decoding against the estimated channel.

#include <cstddef>
#include <span>
#include <vector>

#include "metalink/channel.hpp"

namespace metalink::baselines {

// Bit i of m (most significant first) drives channel use i: +sqrt(Es) for a
// zero bit, -sqrt(Es) for a one bit, imaginary part zero. Requires k == n.
ComplexVec bpsk_encode(int m, int k, int n, double es);
std::vector<ComplexVec> bpsk_codebook(int k, int n, double es);

// (n + L - 1) x L Toeplitz matrix X with X h = conv(h, x).
struct ConvolutionMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  ComplexVec data;  // row-major

  Complex operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

ConvolutionMatrix convolution_matrix(std::span<const Complex> x, std::size_t taps);

struct PilotPair {
  ComplexVec x;
  ComplexVec y;
};

// (sum X^H X + n0 L I)^-1 sum X^H y: the linear MMSE estimate under the
// stationary prior h ~ CN(0, I / L).
ComplexVec mmse_estimate(std::span<const PilotPair> pilots, double n0, std::size_t taps);

// Least-squares estimate (pseudo-inverse, no prior).
ComplexVec ls_estimate(std::span<const PilotPair> pilots, std::size_t taps);

// Exhaustive ML detector over a codebook for a fixed channel estimate.
class MlDetector {
 public:
  MlDetector(std::span<const Complex> h_hat, std::span<const ComplexVec> codebook);

  // argmin_m ||y - conv(h_hat, x_m)||^2, lowest m on ties.
  int decode(std::span<const Complex> y) const;
  std::size_t codebook_size() const noexcept { return expected_.size(); }

 private:
  std::vector<ComplexVec> expected_;
};

int ml_decode(std::span<const Complex> h_hat, std::span<const Complex> y,
              std::span<const ComplexVec> codebook);

// Gaussian tail probability.
double q_function(double x);

// Block error probability of uncoded BPSK with `bits` independent symbols on
// an AWGN channel: 1 - (1 - Q(sqrt(2 Es/N0)))^bits.
double bpsk_block_error(double es_n0_db, int bits);

}  // namespace metalink::baselines

#pragma once

// Independent plain-loop reimplementations and numerical helpers used to
// check the library. Nothing here goes through the autodiff graph.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "metalink/channel.hpp"
#include "metalink/link.hpp"

namespace metalink::oracles {

using Vec = std::vector<double>;

// Forward passes on a flat parameter vector laid out like the model's params.
Vec ref_encode(const link::EncoderModel& shape, std::span<const double> phi, int m);
double ref_policy_log_prob(const link::EncoderModel& shape, std::span<const double> phi, int m,
                           std::span<const Complex> x);
Vec ref_decoder_probs(const link::DecoderModel& shape, std::span<const double> theta,
                      std::span<const Complex> y);
double ref_decoder_ce(const link::DecoderModel& shape, std::span<const double> theta,
                      std::span<const Complex> y, int m);

using ScalarFn = std::function<double(std::span<const double>)>;

// (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Vec central_difference(const ScalarFn& f, std::span<const double> x, double h);

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

double q_function(double x);
double bpsk_block_error(double es_n0_db, int bits);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(std::span<const double> samples);

// Full linear convolution computed directly.
ComplexVec ref_convolve(std::span<const Complex> h, std::span<const Complex> x);

}  // namespace metalink::oracles

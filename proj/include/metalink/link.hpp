#pragma once

// Neural transmitter and receiver.
//
// Encoder: one-hot(2^k) -> dense(M) -> ELU -> dense(2n) -> power
// normalisation, with an optional Gaussian exploration policy around the
// normalised codeword.
//
// Decoder: a radio-transformer front end estimates L taps from the received
// block, correlates the block with the normalised conjugate estimate, and a
// classifier maps [y, z] to 2^k message probabilities.
//
// Messages are 0-based indices in [0, 2^k). Complex vectors cross into the
// real-valued networks as interleaved (re, im) pairs.

#include <cstddef>
#include <span>
#include <vector>

#include "metalink/channel.hpp"
#include "metalink/diff/graph.hpp"
#include "metalink/diff/param_vector.hpp"
#include "metalink/random.hpp"

namespace metalink::link {

struct MessageSpace {
  int k = 1;

  std::size_t size() const noexcept { return std::size_t{1} << k; }
  bool contains(int m) const noexcept { return m >= 0 && static_cast<std::size_t>(m) < size(); }
  std::vector<double> one_hot(int m) const;
};

struct EncoderModel {
  diff::ParamVector params;
  int k = 1;
  int n = 1;
  int hidden = 2;
  double es = 1.0;
  double sigma = 0.0;

  static EncoderModel init(int k, int n, double es, double sigma, Rng& rng, int hidden = 0);
  MessageSpace messages() const { return {k}; }
};

struct DecoderModel {
  diff::ParamVector params;
  int k = 1;
  int n = 1;
  int taps = 1;
  int hidden = 2;

  static DecoderModel init(int k, int n, int taps, Rng& rng, int hidden = 0);
  MessageSpace messages() const { return {k}; }
  std::size_t input_len() const { return static_cast<std::size_t>(n + taps - 1); }
  DecoderModel with_params(diff::ParamVector p) const;
};

diff::Layout encoder_layout(int k, int n, int hidden);
diff::Layout decoder_layout(int k, int n, int taps, int hidden);

// Glorot-uniform weights, zero biases.
diff::ParamVector glorot_init(const diff::Layout& layout, Rng& rng);

std::vector<double> interleave(std::span<const Complex> x);
ComplexVec deinterleave(std::span<const double> v);

// ---- graph builders -------------------------------------------------------

// Normalised codewords for a batch of messages, rows x 2n.
diff::Var encoder_forward(diff::Graph& g, diff::Var params, const EncoderModel& enc,
                          std::span<const int> messages);

// Per-row log pi(x | m), rows x 1. `codewords` is rows x 2n (interleaved).
diff::Var policy_log_prob(diff::Graph& g, diff::Var params, const EncoderModel& enc,
                          std::span<const int> messages, const diff::Tensor& codewords);

// Decoder logits for a batch of received blocks (rows x 2(n+L-1)).
diff::Var decoder_logits(diff::Graph& g, diff::Var params, const DecoderModel& dec,
                         const diff::Tensor& received);

// Per-row cross-entropy, rows x 1.
diff::Var cross_entropy(diff::Graph& g, diff::Var params, const DecoderModel& dec,
                        const diff::Tensor& received, std::span<const int> messages);

// Stacks received blocks as interleaved rows.
diff::Tensor stack_received(std::span<const ComplexVec> blocks, std::size_t expected_len);

// ---- value-level operations -----------------------------------------------

ComplexVec encode(const EncoderModel& enc, int m);
std::vector<ComplexVec> encode_all(const EncoderModel& enc);
ComplexVec sample_codeword(const EncoderModel& enc, int m, Rng& rng);
double policy_log_prob(const EncoderModel& enc, int m, std::span<const Complex> x);

std::vector<double> decode_probs(const DecoderModel& dec, std::span<const Complex> y);
std::vector<std::vector<double>> decode_probs_batch(const DecoderModel& dec,
                                                    std::span<const ComplexVec> ys);
// Argmax, lowest index on ties.
int map_decision(std::span<const double> probs);
// -log p[m].
double cross_entropy(std::span<const double> probs, int m);

}  // namespace metalink::link

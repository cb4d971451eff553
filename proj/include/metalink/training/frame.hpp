#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "metalink/channel.hpp"

namespace metalink::training {

// One transmission: message, transmitted codeword, received block.
struct Block {
  int message = 0;
  ComplexVec x;
  ComplexVec y;
};

// T consecutive blocks sharing one channel realisation. The receiver adapts
// on blocks[pilot_idx] and reports one log-loss per block.
struct Frame {
  std::uint64_t tau = 0;
  std::vector<Block> blocks;
  std::vector<std::size_t> pilot_idx;
  std::vector<double> losses;

  // Throws ArgumentError when the pilot set is empty, too large, repeated or
  // out of range.
  void validate() const;
  std::vector<Block> pilots() const;
};

enum class Transmitter { Neural, Bpsk };

struct TrainConfig {
  int k = 8;
  int n = 8;
  int taps = 3;
  int hidden = 0;  // 0 selects 2^k
  double es = 1.0;
  double es_n0_db = 10.0;
  double rho = 0.9;
  std::size_t frame_len = 256;  // T
  std::size_t pilots = 8;       // T_U
  double kappa = 0.01;
  // Encoder step size; kappa when unset.
  std::optional<double> kappa_tx;
  double eta = 0.1;
  int adapt_steps = 1;
  double sigma = 0.15;
  std::size_t frames = 60000;
  std::uint64_t seed = 0;
  bool first_order = false;
  // Scale the adaptation gradient by 1/T_U instead of 1/T.
  bool normalize_by_pilots = false;
  Transmitter transmitter = Transmitter::Neural;

  void validate() const;
  double n0() const;
  double encoder_kappa() const { return kappa_tx.value_or(kappa); }
  double adapt_normalizer() const {
    return static_cast<double>(normalize_by_pilots ? pilots : frame_len);
  }
};

}  // namespace metalink::training

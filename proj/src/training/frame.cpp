#include "metalink/training/frame.hpp"

#include <algorithm>

#include "metalink/channel.hpp"
#include "metalink/errors.hpp"

namespace metalink::training {

void Frame::validate() const {
  if (pilot_idx.empty()) throw ArgumentError("frame has no pilot blocks");
  if (pilot_idx.size() > blocks.size()) throw ArgumentError("more pilots than blocks");
  std::vector<std::size_t> sorted = pilot_idx;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ArgumentError("pilot indices repeat");
  }
  if (sorted.back() >= blocks.size()) throw ArgumentError("pilot index out of range");
}

std::vector<Block> Frame::pilots() const {
  validate();
  std::vector<Block> out;
  out.reserve(pilot_idx.size());
  for (auto i : pilot_idx) out.push_back(blocks[i]);
  return out;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why, key);
  };
  if (k < 1 || k > 16) fail("k", "must lie in [1, 16]");
  if (n < 1) fail("n", "must be positive");
  if (taps < 1) fail("L", "must be positive");
  if (hidden < 0) fail("hidden", "must be non-negative");
  if (!(es > 0.0)) fail("es", "must be positive");
  if (!(rho >= 0.0 && rho <= 1.0)) fail("rho", "must lie in [0, 1]");
  if (frame_len < 1) fail("T", "must be positive");
  if (pilots < 1 || pilots > frame_len) fail("T_U", "must satisfy 1 <= T_U <= T");
  if (!(kappa >= 0.0)) fail("kappa", "must be non-negative");
  if (kappa_tx && !(*kappa_tx >= 0.0)) fail("kappa_tx", "must be non-negative");
  if (!(eta >= 0.0)) fail("eta", "must be non-negative");
  if (adapt_steps < 0) fail("adapt_steps", "must be non-negative");
  if (!(sigma >= 0.0 && sigma < 1.0)) fail("sigma", "must lie in [0, 1)");
  if (transmitter == Transmitter::Neural && !(sigma > 0.0)) {
    fail("sigma", "policy-gradient encoder training needs sigma > 0");
  }
  if (transmitter == Transmitter::Bpsk && k != n) fail("n", "BPSK transmitter needs n == k");
}

double TrainConfig::n0() const { return channel::snr_to_n0(es_n0_db, es); }

}  // namespace metalink::training

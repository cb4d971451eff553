#pragma once

// Receiver-side decoder adaptation from pilot blocks. Used both during
// (meta-)training and in the test phase, so it must not depend on the
// feedback link.

#include <span>
#include <vector>

#include "metalink/diff/grad.hpp"
#include "metalink/link.hpp"
#include "metalink/random.hpp"
#include "metalink/training/frame.hpp"

namespace metalink::training {

struct BlockBatch {
  diff::Tensor received;
  std::vector<int> messages;
};

BlockBatch make_batch(std::span<const Block> blocks, const link::DecoderModel& arch);

// Sum of per-block cross-entropies of the decoder with the bound parameters.
diff::Var batch_loss_sum(diff::Graph& g, diff::Var params, const link::DecoderModel& arch,
                         const BlockBatch& batch);

// Per-block log-loss -log p(m | y) under the given parameters.
std::vector<double> block_losses(const link::DecoderModel& arch, const diff::ParamVector& params,
                                 std::span<const Block> blocks);

// `steps` SGD passes of phi <- phi - (eta / normalizer) * grad sum_pilots CE(phi),
// starting at theta. normalizer is T in the meta-learning update.
diff::ParamVector adapt_decoder(const link::DecoderModel& arch, const diff::ParamVector& theta,
                                std::span<const Block> pilots, double eta, int steps,
                                double normalizer);

// Fresh initialisation followed by `steps` SGD passes on the mean pilot
// cross-entropy.
link::DecoderModel train_decoder_from_scratch(std::span<const Block> pilots,
                                              const link::DecoderModel& arch, double eta,
                                              int steps, Rng& rng);

}  // namespace metalink::training

#include "metalink/training/adaptation.hpp"

#include "metalink/errors.hpp"

namespace metalink::training {

BlockBatch make_batch(std::span<const Block> blocks, const link::DecoderModel& arch) {
  BlockBatch b;
  std::vector<ComplexVec> ys;
  ys.reserve(blocks.size());
  b.messages.reserve(blocks.size());
  for (const auto& blk : blocks) {
    ys.push_back(blk.y);
    b.messages.push_back(blk.message);
  }
  b.received = link::stack_received(ys, arch.input_len());
  return b;
}

diff::Var batch_loss_sum(diff::Graph& g, diff::Var params, const link::DecoderModel& arch,
                         const BlockBatch& batch) {
  return diff::sum(link::cross_entropy(g, params, arch, batch.received, batch.messages));
}

std::vector<double> block_losses(const link::DecoderModel& arch, const diff::ParamVector& params,
                                 std::span<const Block> blocks) {
  if (blocks.empty()) return {};
  const BlockBatch batch = make_batch(blocks, arch);
  diff::Graph g;
  const diff::Var ce =
      link::cross_entropy(g, diff::bind_constant(g, params), arch, batch.received, batch.messages);
  return ce.value().data;
}

diff::ParamVector adapt_decoder(const link::DecoderModel& arch, const diff::ParamVector& theta,
                                std::span<const Block> pilots, double eta, int steps,
                                double normalizer) {
  if (pilots.empty()) throw ArgumentError("decoder adaptation needs at least one pilot");
  if (steps < 0) throw ArgumentError("adaptation steps must be non-negative");
  if (!(normalizer > 0.0)) throw ArgumentError("adaptation normaliser must be positive");
  if (steps == 0 || eta == 0.0) return theta;
  const BlockBatch batch = make_batch(pilots, arch);
  const diff::Objective pilot_loss = [&](diff::Graph& g, diff::Var p) {
    return batch_loss_sum(g, p, arch, batch);
  };
  diff::ParamVector phi = theta;
  for (int s = 0; s < steps; ++s) {
    phi = diff::apply_sgd(phi, diff::grad(pilot_loss, phi), eta / normalizer);
  }
  return phi;
}

link::DecoderModel train_decoder_from_scratch(std::span<const Block> pilots,
                                              const link::DecoderModel& arch, double eta,
                                              int steps, Rng& rng) {
  if (pilots.empty()) throw ArgumentError("training from scratch needs at least one pilot");
  link::DecoderModel dec = link::DecoderModel::init(arch.k, arch.n, arch.taps, rng, arch.hidden);
  dec.params = adapt_decoder(dec, dec.params, pilots, eta, steps,
                             static_cast<double>(pilots.size()));
  return dec;
}

}  // namespace metalink::training

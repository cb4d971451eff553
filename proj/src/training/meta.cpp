#include "metalink/training/meta.hpp"

#include <array>

#include "metalink/diff/grad.hpp"
#include "metalink/errors.hpp"
#include "metalink/training/adaptation.hpp"

namespace metalink::training {

namespace {

struct FrameBatches {
  BlockBatch pilots;
  BlockBatch all;
  double normalizer;
  double outer_scale;
};

FrameBatches prepare(const link::DecoderModel& arch, const Frame& frame, const TrainConfig& cfg) {
  const std::vector<Block> pilots = frame.pilots();
  FrameBatches fb{make_batch(pilots, arch), make_batch(frame.blocks, arch),
                  cfg.adapt_normalizer(), 1.0 / static_cast<double>(frame.blocks.size())};
  return fb;
}

}  // namespace

MetaStep meta_step(const link::DecoderModel& arch, const diff::ParamVector& theta,
                   const Frame& frame, const TrainConfig& cfg) {
  const FrameBatches fb = prepare(arch, frame, cfg);
  const std::vector<Block> pilots = frame.pilots();
  MetaStep out;
  out.adapted = adapt_decoder(arch, theta, pilots, cfg.eta, cfg.adapt_steps, fb.normalizer);

  diff::ParamVector outer_grad;
  {
    diff::Graph g;
    const diff::Var p = diff::bind(g, out.adapted);
    const diff::Var ce = link::cross_entropy(g, p, arch, fb.all.received, fb.all.messages);
    const diff::Var outer = fb.outer_scale * diff::sum(ce);
    const std::array<diff::Var, 1> wrt{p};
    outer_grad = diff::as_params(g.backward(outer, wrt)[0], out.adapted);
    out.losses = ce.value().data;
  }

  if (cfg.adapt_steps == 0 || cfg.eta == 0.0 || cfg.first_order) {
    out.gradient = std::move(outer_grad);
  } else if (cfg.adapt_steps == 1) {
    const diff::Objective pilot_loss = [&](diff::Graph& g, diff::Var p) {
      return batch_loss_sum(g, p, arch, fb.pilots);
    };
    const diff::ParamVector hv = diff::grad_of_grad_dot(pilot_loss, theta, outer_grad);
    out.gradient = diff::apply_sgd(outer_grad, hv, cfg.eta / fb.normalizer);
  } else {
    out.gradient = meta_gradient_unrolled(arch, theta, frame, cfg);
  }
  return out;
}

diff::ParamVector meta_gradient(const link::DecoderModel& arch, const diff::ParamVector& theta,
                                const Frame& frame, const TrainConfig& cfg) {
  return meta_step(arch, theta, frame, cfg).gradient;
}

diff::ParamVector meta_gradient_unrolled(const link::DecoderModel& arch,
                                         const diff::ParamVector& theta, const Frame& frame,
                                         const TrainConfig& cfg) {
  const FrameBatches fb = prepare(arch, frame, cfg);
  const double step = cfg.eta / fb.normalizer;
  diff::Graph g;
  const diff::Var root = diff::bind(g, theta);
  diff::Var current = root;
  for (int s = 0; s < cfg.adapt_steps; ++s) {
    const diff::Var inner = batch_loss_sum(g, current, arch, fb.pilots);
    const std::array<diff::Var, 1> at{current};
    diff::Var direction = g.backward(inner, at)[0];
    if (cfg.first_order) direction = g.constant(direction.value());
    current = current - step * direction;
  }
  const diff::Var outer = fb.outer_scale * batch_loss_sum(g, current, arch, fb.all);
  const std::array<diff::Var, 1> wrt{root};
  return diff::as_params(g.backward(outer, wrt)[0], theta);
}

diff::ParamVector meta_update(const diff::ParamVector& theta, const diff::ParamVector& grad,
                              double kappa) {
  return diff::apply_sgd(theta, grad, kappa);
}

}  // namespace metalink::training

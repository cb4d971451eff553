#include "metalink/training/loops.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "metalink/baselines.hpp"
#include "metalink/diff/grad.hpp"
#include "metalink/training/adaptation.hpp"
#include "metalink/training/feedback.hpp"
#include "metalink/training/meta.hpp"

namespace metalink::training {

namespace {

std::vector<int> message_schedule(const TrainConfig& cfg, Rng& rng) {
  const std::size_t count = std::size_t{1} << cfg.k;
  std::vector<int> msgs(cfg.frame_len);
  if (cfg.frame_len == count) {
    std::iota(msgs.begin(), msgs.end(), 0);
    std::shuffle(msgs.begin(), msgs.end(), rng);
  } else {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(count) - 1);
    for (auto& m : msgs) m = pick(rng);
  }
  return msgs;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

channel::ChannelState start_channel(const TrainConfig& cfg, Rng& rng) {
  return channel::make_state(static_cast<std::size_t>(cfg.taps), cfg.rho, cfg.frame_len,
                             cfg.n0(), cfg.es, rng);
}

void update_encoder(TrainResult& models, const Frame& frame, const FeedbackPacket& fb,
                    const TrainConfig& cfg) {
  if (models.transmitter == Transmitter::Neural) {
    models.encoder.params = encoder_update(models.encoder, frame, fb, cfg.encoder_kappa());
  }
}

}  // namespace

TrainResult initial_models(const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  TrainResult r;
  r.transmitter = cfg.transmitter;
  if (cfg.transmitter == Transmitter::Neural) {
    r.encoder = link::EncoderModel::init(cfg.k, cfg.n, cfg.es, cfg.sigma, rng, cfg.hidden);
  } else {
    r.encoder.k = cfg.k;
    r.encoder.n = cfg.n;
    r.encoder.es = cfg.es;
  }
  r.decoder = link::DecoderModel::init(cfg.k, cfg.n, cfg.taps, rng, cfg.hidden);
  return r;
}

Frame transmit_frame(std::uint64_t tau, const TrainConfig& cfg, const TrainResult& models,
                     channel::ChannelState& state, Rng& rng) {
  Frame f;
  f.tau = tau;
  const std::vector<int> msgs = message_schedule(cfg, rng);
  f.blocks.reserve(msgs.size());
  for (int m : msgs) {
    Block b;
    b.message = m;
    b.x = models.transmitter == Transmitter::Neural
              ? link::sample_codeword(models.encoder, m, rng)
              : baselines::bpsk_encode(m, cfg.k, cfg.n, cfg.es);
    b.y = channel::transmit(state, b.x, rng);
    state = channel::advance(std::move(state), rng);
    f.blocks.push_back(std::move(b));
  }
  f.pilot_idx.resize(cfg.pilots);
  std::iota(f.pilot_idx.begin(), f.pilot_idx.end(), std::size_t{0});
  return f;
}

TrainResult run_meta_training(const TrainConfig& cfg, Rng& rng, const FrameCallback& on_frame) {
  TrainResult models = initial_models(cfg, rng);
  channel::ChannelState state = start_channel(cfg, rng);
  if (on_frame) on_frame(0, models);
  for (std::uint64_t tau = 1; tau <= cfg.frames; ++tau) {
    Frame frame = transmit_frame(tau, cfg, models, state, rng);
    MetaStep step = meta_step(models.decoder, models.decoder.params, frame, cfg);
    frame.losses = step.losses;
    const FeedbackPacket fb(tau, std::move(step.losses));
    update_encoder(models, frame, fb, cfg);
    models.decoder.params = meta_update(models.decoder.params, step.gradient, cfg.kappa);
    models.history.push_back({tau, mean(frame.losses)});
    if (on_frame) on_frame(tau, models);
  }
  return models;
}

TrainResult run_joint_training(const TrainConfig& cfg, Rng& rng, const FrameCallback& on_frame) {
  TrainResult models = initial_models(cfg, rng);
  channel::ChannelState state = start_channel(cfg, rng);
  if (on_frame) on_frame(0, models);
  for (std::uint64_t tau = 1; tau <= cfg.frames; ++tau) {
    Frame frame = transmit_frame(tau, cfg, models, state, rng);
    const BlockBatch batch = make_batch(frame.blocks, models.decoder);
    const double scale = 1.0 / static_cast<double>(frame.blocks.size());
    diff::ParamVector grad;
    {
      diff::Graph g;
      const diff::Var p = diff::bind(g, models.decoder.params);
      const diff::Var ce =
          link::cross_entropy(g, p, models.decoder, batch.received, batch.messages);
      const diff::Var loss = scale * diff::sum(ce);
      const std::array<diff::Var, 1> wrt{p};
      grad = diff::as_params(g.backward(loss, wrt)[0], models.decoder.params);
      frame.losses = ce.value().data;
    }
    const FeedbackPacket fb(tau, frame.losses);
    update_encoder(models, frame, fb, cfg);
    models.decoder.params = diff::apply_sgd(models.decoder.params, grad, cfg.kappa);
    models.history.push_back({tau, mean(frame.losses)});
    if (on_frame) on_frame(tau, models);
  }
  return models;
}

void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows,
                       std::string_view scheme, bool header) {
  if (header) out << "tau,mean_loss,scheme\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : rows) out << r.tau << ',' << r.mean_loss << ',' << scheme << '\n';
  out.precision(old_precision);
}

}  // namespace metalink::training

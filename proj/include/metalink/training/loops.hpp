#pragma once

// Online training over a stream of frames: every frame the transmitter sends
// T exploratory blocks through the fading channel, the receiver adapts on
// the pilot subset and feeds back per-block log-losses, then both sides take
// one SGD step.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "metalink/channel.hpp"
#include "metalink/link.hpp"
#include "metalink/random.hpp"
#include "metalink/training/frame.hpp"

namespace metalink::training {

struct HistoryRow {
  std::uint64_t tau = 0;
  double mean_loss = 0.0;
};

struct TrainResult {
  Transmitter transmitter = Transmitter::Neural;
  link::EncoderModel encoder;  // unused for the BPSK transmitter
  link::DecoderModel decoder;  // theta_R (meta) or phi_R (joint)
  std::vector<HistoryRow> history;
};

// Called with frames_done = 0 before the first frame and after every frame.
using FrameCallback =
    std::function<void(std::uint64_t frames_done, const TrainResult& current)>;

// Initial encoder/decoder drawn from rng for the configured shapes.
TrainResult initial_models(const TrainConfig& cfg, Rng& rng);

// Generates one training frame and advances the channel state through it.
Frame transmit_frame(std::uint64_t tau, const TrainConfig& cfg, const TrainResult& models,
                     channel::ChannelState& state, Rng& rng);

// Hybrid scheme: encoder trained by policy gradients, decoder initialisation
// meta-trained through the pilot adaptation.
TrainResult run_meta_training(const TrainConfig& cfg, Rng& rng, const FrameCallback& on_frame = {});

// Baseline: one decoder trained by plain SGD on every frame, encoder trained
// by policy gradients on that decoder's losses. eta is unused.
TrainResult run_joint_training(const TrainConfig& cfg, Rng& rng, const FrameCallback& on_frame = {});

// CSV rows "tau,mean_loss,scheme".
void write_history_csv(std::ostream& out, std::span<const HistoryRow> rows,
                       std::string_view scheme, bool header);

}  // namespace metalink::training

#pragma once

// Experiment configuration. The file format is one `key = value` pair per
// line, `#` starts a comment, lists are comma separated. Unknown or repeated
// keys are errors that name the key.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "metalink/harness/evaluation.hpp"
#include "metalink/training/frame.hpp"

namespace metalink::harness {

enum class SweepAxis { Pilots, TrainFrames, Rho };

std::string_view axis_name(SweepAxis a);

struct ExperimentConfig {
  std::vector<Scheme> schemes{Scheme::HybridMeta};
  training::TrainConfig train;  // transmitter is set per scheme

  SweepAxis axis = SweepAxis::Pilots;
  std::vector<std::size_t> test_pilots{8};  // key P; evaluated on every axis
  std::vector<double> rho_values;           // axis rho
  std::vector<std::size_t> frame_values;    // axis train_frames

  std::size_t payload_blocks = 10000;
  std::size_t test_frames = 500;
  double test_eta_meta = 0.1;
  double test_eta_other = 0.001;
  int test_adapt_steps = 1;
  double scratch_eta = 0.5;
  int scratch_steps = 100;
  Fading test_fading = Fading::Rayleigh;
  Csi csi = Csi::Estimated;

  // Model selection during training: every select_every frames the current
  // model is scored on a validation stream and the best one is kept.
  // 0 keeps the final model.
  std::size_t select_every = 0;
  std::size_t select_pilots = 0;  // 0 selects T_U
  std::size_t select_blocks = 2000;
  std::size_t select_frames = 200;

  std::size_t runs = 1;
  std::size_t threads = 1;

  // Throws ConfigError naming the offending key.
  void validate() const;
  LinkSetup link() const;
  // Run r uses seed + r.
  std::vector<std::uint64_t> run_seeds() const;
  // Training configuration for one scheme (transmitter filled in).
  training::TrainConfig train_for(Scheme s) const;
};

// Sets one key from its textual value. Throws ConfigError.
void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Parses a whole file body onto the defaults; `origin` prefixes messages.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "config");
ExperimentConfig load_config(const std::string& path);

// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& cfg);

// Every key in canonical order with its value rendered as text.
std::vector<std::pair<std::string, std::string>> config_entries(const ExperimentConfig& cfg);

}  // namespace metalink::harness

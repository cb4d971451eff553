#pragma once

// Experiment driver: trains the configured schemes, evaluates them along the
// sweep axis and writes results.csv, manifest.json, per-run training
// histories and checkpoints.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metalink/harness/config.hpp"
#include "metalink/harness/evaluation.hpp"
#include "metalink/training/loops.hpp"

namespace metalink::harness {

struct BlerRecord {
  Scheme scheme = Scheme::HybridMeta;
  std::size_t pilots = 0;  // P
  double rho = 0.0;
  std::size_t train_frames = 0;
  std::uint64_t run_seed = 0;
  double bler = 0.0;
  double std = 0.0;  // across runs of the same point
};

struct RunHistory {
  Scheme scheme = Scheme::HybridMeta;
  std::uint64_t run_seed = 0;
  std::size_t point = 0;  // index into rho_values on the rho axis, else 0
  std::vector<training::HistoryRow> rows;
};

struct Selection {
  Scheme scheme = Scheme::HybridMeta;
  std::uint64_t run_seed = 0;
  double rho = 0.0;
  std::uint64_t frame = 0;
  double validation_bler = 0.0;
};

struct ExperimentResult {
  std::vector<BlerRecord> rows;
  std::vector<RunHistory> histories;
  std::vector<Selection> selections;
  bool interrupted = false;
};

// Thrown out of long loops once the stop flag is raised.
struct Interrupted : std::exception {
  const char* what() const noexcept override { return "interrupted"; }
};

using LogFn = std::function<void(std::string_view)>;
// Polled between frames and evaluations; returning true raises Interrupted.
using StopFn = std::function<bool()>;

struct TrainedScheme {
  training::TrainResult models;
  Selection selection;
};

// Trains one scheme for one run. With select_every > 0 the returned models
// are the best checkpoint on the validation stream. `snapshot`, if set, is
// called at frame 0 and after every frame with the current models.
TrainedScheme train_scheme(const ExperimentConfig& cfg, Scheme scheme, std::uint64_t run_seed,
                           double rho, std::size_t point, const training::FrameCallback& snapshot = {},
                           const StopFn& stop = {});

// Test-phase scheme for P pilots. `models` is required for trained schemes.
std::unique_ptr<TestScheme> make_test_scheme(const ExperimentConfig& cfg, Scheme scheme,
                                             const training::TrainResult* models,
                                             std::size_t pilots);

// BLER of one scheme at P pilots. The test stream depends only on
// (run_seed, P, point), so every scheme sees the same channels.
double test_bler(const ExperimentConfig& cfg, const TestScheme& scheme, std::uint64_t run_seed,
                 std::size_t pilots, std::size_t point);

// Train + evaluate along cfg.axis. Returns rows sorted and with std filled.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::atomic<bool>* stop = nullptr,
                                const LogFn& log = {});

// Training only, at cfg.train.rho; models go to `dir` as checkpoints.
ExperimentResult train_and_save(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                const std::atomic<bool>* stop = nullptr, const LogFn& log = {});
// Evaluates checkpoints written by train_and_save at every P.
ExperimentResult evaluate_saved(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                                const std::atomic<bool>* stop = nullptr, const LogFn& log = {});

std::filesystem::path encoder_checkpoint_path(const std::filesystem::path& dir, Scheme s,
                                              std::uint64_t run_seed);
std::filesystem::path decoder_checkpoint_path(const std::filesystem::path& dir, Scheme s,
                                              std::uint64_t run_seed);

// Sorts rows and sets each row's std to the sample standard deviation of
// bler across runs sharing (scheme, P, rho, train_frames).
void finalize_rows(std::vector<BlerRecord>& rows);

inline constexpr std::string_view kResultsHeader = "scheme,P,rho,train_frames,run_seed,bler,std";

void write_results_csv(std::ostream& out, std::span<const BlerRecord> rows);
// Throws ArgumentError on a header mismatch or malformed row.
std::vector<BlerRecord> read_results_csv(std::istream& in);

// Writes results.csv, manifest.json and history-run<seed>[-p<point>].csv.
void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                   const ExperimentResult& result, std::string_view verb);

std::string manifest_json(const ExperimentConfig& cfg, const ExperimentResult& result,
                          std::string_view verb);

}  // namespace metalink::harness

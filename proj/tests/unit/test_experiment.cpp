#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metalink/errors.hpp"
#include "metalink/harness/experiment.hpp"

using namespace metalink;
using namespace metalink::harness;

namespace {

ExperimentConfig small_config() {
  return parse_config(
      "schemes = hybrid_meta, joint_ae\n"
      "k = 3\nn = 3\nL = 2\nT = 8\nT_U = 2\n"
      "frames = 15\nkappa = 0.05\neta = 0.2\n"
      "P = 1, 2, 4, 8\nruns = 2\nseed = 17\n"
      "payload_blocks = 60\ntest_frames = 6\n");
}

std::string csv_text(const std::vector<BlerRecord>& rows) {
  std::ostringstream out;
  write_results_csv(out, rows);
  return out.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("metalink_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("a pilot sweep yields one row per scheme, P and run") {
  auto cfg = small_config();
  cfg.schemes = {Scheme::HybridMeta};
  const auto result = run_experiment(cfg);
  CHECK(result.rows.size() == 8);
  CHECK_FALSE(result.interrupted);
  for (const auto& row : result.rows) {
    CHECK(row.train_frames == 15);
    CHECK(row.rho == cfg.train.rho);
    CHECK(row.bler >= 0.0);
    CHECK(row.bler <= 1.0);
    CHECK((row.run_seed == 17 || row.run_seed == 18));
  }
  CHECK(result.histories.size() == 2);
  CHECK(result.histories[0].rows.size() == 15);
}

TEST_CASE("experiments are reproducible and independent of the thread count") {
  auto cfg = small_config();
  const auto a = csv_text(run_experiment(cfg).rows);
  const auto b = csv_text(run_experiment(cfg).rows);
  CHECK(a == b);
  cfg.threads = 2;
  CHECK(csv_text(run_experiment(cfg).rows) == a);
}

TEST_CASE("the frames axis reports a non-increasing best-so-far curve") {
  auto cfg = small_config();
  cfg.schemes = {Scheme::HybridMeta, Scheme::BpskMlMmse};
  cfg.axis = SweepAxis::TrainFrames;
  cfg.frame_values = {0, 5, 15};
  cfg.test_pilots = {2};
  cfg.runs = 1;
  const auto result = run_experiment(cfg);
  CHECK(result.rows.size() == 6);
  std::vector<double> curve;
  for (const auto& row : result.rows) {
    if (row.scheme == Scheme::HybridMeta) curve.push_back(row.bler);
  }
  REQUIRE(curve.size() == 3);
  CHECK(curve[1] <= curve[0]);
  CHECK(curve[2] <= curve[1]);
}

TEST_CASE("finalize_rows fills the sample standard deviation") {
  std::vector<BlerRecord> rows{
      {Scheme::JointAe, 2, 0.9, 10, 2, 0.3, 0.0},
      {Scheme::HybridMeta, 2, 0.9, 10, 1, 0.2, 0.0},
      {Scheme::HybridMeta, 2, 0.9, 10, 2, 0.4, 0.0},
      {Scheme::HybridMeta, 2, 0.9, 10, 3, 0.6, 0.0},
  };
  finalize_rows(rows);
  CHECK(rows[0].scheme == Scheme::HybridMeta);
  CHECK(rows[0].run_seed == 1);
  for (int i = 0; i < 3; ++i) CHECK(rows[static_cast<std::size_t>(i)].std == doctest::Approx(0.2));
  CHECK(rows[3].scheme == Scheme::JointAe);
  CHECK(rows[3].std == 0.0);
}

TEST_CASE("results CSV round-trips and rejects malformed input") {
  std::vector<BlerRecord> rows{{Scheme::BpskMlMmse, 4, 0.5, 0, 3, 0.125, 0.01},
                               {Scheme::HybridMeta, 1, 0.99, 600, 4, 1.0 / 3.0, 0.0}};
  const auto text = csv_text(rows);
  CHECK(text.rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  std::istringstream in(text);
  const auto back = read_results_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1].scheme == Scheme::HybridMeta);
  CHECK(back[1].pilots == 1);
  CHECK(back[1].rho == 0.99);
  CHECK(back[1].train_frames == 600);
  CHECK(back[1].bler == 1.0 / 3.0);
  CHECK(back[0].std == 0.01);

  std::istringstream bad_header("scheme,P,bler\n");
  CHECK_THROWS_AS(read_results_csv(bad_header), ArgumentError);
  std::istringstream bad_row(std::string(kResultsHeader) + "\nhybrid_meta,1,0.9,10,1,oops,0\n");
  CHECK_THROWS_AS(read_results_csv(bad_row), ArgumentError);
  std::istringstream bad_scheme(std::string(kResultsHeader) + "\nmaml,1,0.9,10,1,0.5,0\n");
  CHECK_THROWS_AS(read_results_csv(bad_scheme), ArgumentError);
}

TEST_CASE("outputs: results, manifest and history files") {
  auto cfg = small_config();
  cfg.schemes = {Scheme::HybridMeta};
  cfg.test_pilots = {2};
  const auto result = run_experiment(cfg);
  const auto dir = scratch_dir("outputs");
  write_outputs(dir, cfg, result, "sweep");

  std::ifstream csv(dir / "results.csv");
  CHECK(read_results_csv(csv).size() == 2);

  std::ifstream mf(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  CHECK(manifest["verb"] == "sweep");
  CHECK(manifest["run_seeds"] == std::vector<std::uint64_t>{17, 18});
  CHECK(manifest["config"]["k"] == 3);
  CHECK(manifest.contains("git_describe"));
  CHECK(manifest["interrupted"] == false);

  std::ifstream hist(dir / "history-run17.csv");
  std::string header, first;
  std::getline(hist, header);
  std::getline(hist, first);
  CHECK(header == "tau,mean_loss,scheme");
  CHECK(first.rfind("1,", 0) == 0);
  CHECK(first.find(",hybrid_meta") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a raised stop flag interrupts with partial results") {
  auto cfg = small_config();
  std::atomic<bool> stop{true};
  const auto result = run_experiment(cfg, &stop);
  CHECK(result.interrupted);
  CHECK(result.rows.size() < 16);
}

TEST_CASE("train then evaluate from checkpoints matches a direct run") {
  auto cfg = small_config();
  cfg.schemes = {Scheme::JointAe, Scheme::BpskMlMmse};
  cfg.runs = 1;
  const auto dir = scratch_dir("ckpt");
  train_and_save(cfg, dir);
  CHECK(std::filesystem::exists(encoder_checkpoint_path(dir, Scheme::JointAe, 17)));
  CHECK(std::filesystem::exists(decoder_checkpoint_path(dir, Scheme::JointAe, 17)));
  const auto saved = evaluate_saved(cfg, dir);
  const auto direct = run_experiment(cfg);
  CHECK(csv_text(saved.rows) == csv_text(direct.rows));

  std::filesystem::remove_all(dir / "checkpoints");
  CHECK_THROWS_AS(evaluate_saved(cfg, dir), IoError);
  std::filesystem::remove_all(dir);
}

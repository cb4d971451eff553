#include <doctest.h>

#include <string>

#include "metalink/errors.hpp"
#include "metalink/harness/config.hpp"

using namespace metalink;
using namespace metalink::harness;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("defaults are the full-scale setup") {
  const ExperimentConfig cfg;
  CHECK(cfg.train.k == 8);
  CHECK(cfg.train.n == 8);
  CHECK(cfg.train.taps == 3);
  CHECK(cfg.train.frame_len == 256);
  CHECK(cfg.train.pilots == 8);
  CHECK(cfg.train.kappa == 0.01);
  CHECK(cfg.train.eta == 0.1);
  CHECK(cfg.train.sigma == 0.15);
  CHECK(cfg.train.es_n0_db == 10.0);
  CHECK(cfg.payload_blocks == 10000);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("parsing keys, comments and lists") {
  const auto cfg = parse_config(
      "# comment\n"
      "schemes = hybrid_meta, bpsk_ml_mmse  # trailing comment\n"
      "k = 4\nn = 4\nL = 2\n"
      "  T = 16\nT_U = 4\n"
      "kappa_tx = 0.001\n"
      "axis = rho\nrho_values = 0, 0.5, 0.99\n"
      "P = 1, 4\n"
      "first_order = true\n"
      "csi = perfect\n"
      "\n");
  CHECK(cfg.schemes == std::vector<Scheme>{Scheme::HybridMeta, Scheme::BpskMlMmse});
  CHECK(cfg.train.k == 4);
  CHECK(cfg.train.taps == 2);
  CHECK(cfg.train.frame_len == 16);
  CHECK(cfg.train.pilots == 4);
  CHECK(cfg.train.kappa_tx == 0.001);
  CHECK(cfg.train.encoder_kappa() == 0.001);
  CHECK(cfg.axis == SweepAxis::Rho);
  CHECK(cfg.rho_values == std::vector<double>{0.0, 0.5, 0.99});
  CHECK(cfg.test_pilots == std::vector<std::size_t>{1, 4});
  CHECK(cfg.train.first_order);
  CHECK(cfg.csi == Csi::Perfect);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("format_config round-trips") {
  auto cfg = parse_config("schemes = joint_ae, bpsk_neural_meta\nk = 3\nn = 3\nrho = 0.75\n"
                          "axis = train_frames\nframes = 40\nframe_values = 0, 20, 40\n"
                          "es_n0_db = 7.25\nkappa_tx = 0.002\n");
  const auto again = parse_config(format_config(cfg));
  CHECK(format_config(again) == format_config(cfg));
  CHECK(again.train.rho == 0.75);
  CHECK(again.train.es_n0_db == 7.25);
  CHECK(again.frame_values == std::vector<std::size_t>{0, 20, 40});

  const auto defaults = parse_config(format_config(ExperimentConfig{}));
  CHECK_FALSE(defaults.train.kappa_tx.has_value());
}

TEST_CASE("errors name the offending key") {
  CHECK(error_key("pilots_per_frame = 3\n") == "pilots_per_frame");
  CHECK(error_key("k = 2\nk = 3\n") == "k");
  CHECK(error_key("k = two\n") == "k");
  CHECK(error_key("k = 2.5\n") == "k");
  CHECK(error_key("schemes = hybrid_meta, maml\n") == "schemes");
  CHECK(error_key("schemes = hybrid_meta, hybrid_meta\n") == "schemes");
  CHECK(error_key("axis = snr\n") == "axis");
  CHECK(error_key("first_order = maybe\n") == "first_order");
  CHECK(error_key("sigma = 1.2\n") == "sigma");
  CHECK(error_key("T = 4\nT_U = 5\n") == "T_U");
  CHECK(error_key("P = 0\n") == "P");
  CHECK(error_key("k = 2\nn = 2\nT_U = 2\nP = 5\n") == "P");
  CHECK(error_key("schemes = bpsk_ml_mmse\nk = 4\nn = 5\n") == "n");
  CHECK(error_key("axis = rho\n") == "rho_values");
  CHECK(error_key("axis = rho\nrho_values = 0.5, 1.5\n") == "rho_values");
  CHECK(error_key("axis = train_frames\nframes = 10\nframe_values = 20\n") == "frame_values");
  CHECK(error_key("payload_blocks = 0\n") == "payload_blocks");
  CHECK(error_key("runs = 0\n") == "runs");
  CHECK(error_key("threads = 0\n") == "threads");
  CHECK(error_key("k = \n") == "k");
  CHECK(error_key("just some words\n") != "<none>");
}

TEST_CASE("P = 0 is allowed only without pilots") {
  CHECK(error_key("schemes = bpsk_ml_mmse\ncsi = perfect\nP = 0\n") == "<none>");
  CHECK(error_key("schemes = bpsk_ml_mmse\nP = 0\n") == "P");
}

TEST_CASE("error messages carry origin and line") {
  try {
    parse_config("k = 2\n\nbogus = 1\n", "exp.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("exp.cfg:3") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("set_key and config_entries") {
  ExperimentConfig cfg;
  set_key(cfg, "seed", "42");
  set_key(cfg, "threads", "3");
  CHECK(cfg.train.seed == 42);
  CHECK(cfg.threads == 3);
  CHECK(cfg.run_seeds() == std::vector<std::uint64_t>{42});
  cfg.runs = 3;
  CHECK(cfg.run_seeds() == std::vector<std::uint64_t>{42, 43, 44});
  bool found = false;
  for (const auto& [key, value] : config_entries(cfg)) {
    if (key == "seed") {
      CHECK(value == "42");
      found = true;
    }
  }
  CHECK(found);
  CHECK_THROWS_AS(set_key(cfg, "nope", "1"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/metalink.cfg"), IoError);
}

TEST_CASE("schemes map to their transmitters") {
  const auto cfg = parse_config("schemes = bpsk_neural_meta, hybrid_meta\n");
  CHECK(cfg.train_for(Scheme::BpskNeuralMeta).transmitter == training::Transmitter::Bpsk);
  CHECK(cfg.train_for(Scheme::HybridMeta).transmitter == training::Transmitter::Neural);
}

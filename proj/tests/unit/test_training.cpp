#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "metalink/diff/grad.hpp"
#include "metalink/errors.hpp"
#include "metalink/oracles/reference.hpp"
#include "metalink/training/adaptation.hpp"
#include "metalink/training/feedback.hpp"
#include "metalink/training/loops.hpp"
#include "metalink/training/meta.hpp"

using namespace metalink;
using namespace metalink::training;
using metalink::oracles::central_difference;
using metalink::oracles::relative_error;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.k = 2;
  cfg.n = 2;
  cfg.taps = 2;
  cfg.frame_len = 6;
  cfg.pilots = 2;
  cfg.eta = 0.5;
  cfg.kappa = 0.05;
  cfg.sigma = 0.2;
  cfg.frames = 10;
  return cfg;
}

struct Fixture {
  TrainConfig cfg = tiny_config();
  TrainResult models;
  Frame frame;

  explicit Fixture(std::uint64_t seed, TrainConfig c = tiny_config()) : cfg(c) {
    Rng rng = make_rng(seed);
    models = initial_models(cfg, rng);
    std::normal_distribution<double> normal(0.0, 0.3);
    std::vector<double> v(models.decoder.params.values().begin(),
                          models.decoder.params.values().end());
    for (double& x : v) x += normal(rng);
    models.decoder.params = models.decoder.params.with_values(v);
    auto state = channel::make_state(static_cast<std::size_t>(cfg.taps), cfg.rho, cfg.frame_len,
                                     cfg.n0(), cfg.es, rng);
    frame = transmit_frame(1, cfg, models, state, rng);
  }

  const diff::ParamVector& theta() const { return models.decoder.params; }
  const link::DecoderModel& arch() const { return models.decoder; }
};

diff::ParamVector plain_outer_gradient(const Fixture& f, const diff::ParamVector& at) {
  const auto batch = make_batch(f.frame.blocks, f.arch());
  const double scale = 1.0 / static_cast<double>(f.frame.blocks.size());
  return diff::grad(
      [&](diff::Graph& g, diff::Var p) { return scale * batch_loss_sum(g, p, f.arch(), batch); },
      at);
}

double norm_diff(const diff::ParamVector& a, const diff::ParamVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("frame pilot sets are validated") {
  Frame f;
  f.blocks.resize(4);
  CHECK_THROWS_AS(f.validate(), ArgumentError);
  f.pilot_idx = {0, 0};
  CHECK_THROWS_AS(f.validate(), ArgumentError);
  f.pilot_idx = {1, 4};
  CHECK_THROWS_AS(f.validate(), ArgumentError);
  f.pilot_idx = {0, 1, 2, 3, 0};
  CHECK_THROWS_AS(f.validate(), ArgumentError);
  f.pilot_idx = {3, 1};
  CHECK_NOTHROW(f.validate());
  CHECK(f.pilots().size() == 2);
}

TEST_CASE("training configuration is validated") {
  auto bad = [](auto mutate, const char* key) {
    TrainConfig cfg = tiny_config();
    mutate(cfg);
    try {
      cfg.validate();
      FAIL("expected ConfigError for " << key);
    } catch (const ConfigError& e) {
      CHECK(e.key() == key);
    }
  };
  bad([](TrainConfig& c) { c.pilots = 0; }, "T_U");
  bad([](TrainConfig& c) { c.pilots = 7; }, "T_U");
  bad([](TrainConfig& c) { c.sigma = 1.0; }, "sigma");
  bad([](TrainConfig& c) { c.sigma = 0.0; }, "sigma");
  bad([](TrainConfig& c) { c.kappa = -1.0; }, "kappa");
  bad([](TrainConfig& c) { c.rho = 2.0; }, "rho");
  bad([](TrainConfig& c) { c.transmitter = Transmitter::Bpsk; c.n = 3; }, "n");
}

TEST_CASE("frames carry every message once when T = 2^k, pilots first") {
  TrainConfig cfg = tiny_config();
  cfg.frame_len = 4;
  Rng rng = make_rng(60);
  const auto models = initial_models(cfg, rng);
  auto state = channel::make_state(2, 0.9, 4, cfg.n0(), 1.0, rng);
  const Frame f = transmit_frame(3, cfg, models, state, rng);
  CHECK(f.tau == 3);
  REQUIRE(f.blocks.size() == 4);
  std::set<int> seen;
  for (const auto& b : f.blocks) {
    seen.insert(b.message);
    CHECK(b.y.size() == 3);
  }
  CHECK(seen.size() == 4);
  CHECK(f.pilot_idx == std::vector<std::size_t>{0, 1});
}

TEST_CASE("adapt_decoder") {
  const Fixture f(61);
  const auto pilots = f.frame.pilots();
  const double T = static_cast<double>(f.cfg.frame_len);
  CHECK(adapt_decoder(f.arch(), f.theta(), pilots, 0.0, 3, T) == f.theta());
  CHECK(adapt_decoder(f.arch(), f.theta(), pilots, 0.5, 0, T) == f.theta());
  CHECK_THROWS_AS(adapt_decoder(f.arch(), f.theta(), std::span<const Block>{}, 0.5, 1, T),
                  ArgumentError);

  SUBCASE("one step is theta - (eta/T) grad, checked by finite differences") {
    const Block& pilot = pilots.front();
    const auto phi = adapt_decoder(f.arch(), f.theta(), std::span(&pilot, 1), 0.5, 1, T);
    const auto fd = central_difference(
        [&](std::span<const double> th) {
          return oracles::ref_decoder_ce(f.arch(), th, pilot.y, pilot.message);
        },
        f.theta().values(), 1e-6);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      CHECK(phi[i] == doctest::Approx(f.theta()[i] - 0.5 / T * fd[i]).epsilon(1e-7));
    }
  }
  SUBCASE("steps re-evaluate the gradient") {
    const auto two = adapt_decoder(f.arch(), f.theta(), pilots, 0.5, 2, T);
    const auto one = adapt_decoder(f.arch(), f.theta(), pilots, 0.5, 1, T);
    CHECK(adapt_decoder(f.arch(), one, pilots, 0.5, 1, T) == two);
  }
}

TEST_CASE("encoder_update") {
  const Fixture f(62);
  const auto& enc = f.models.encoder;
  const std::size_t T = f.frame.blocks.size();

  CHECK(encoder_update(enc, f.frame, FeedbackPacket(1, std::vector<double>(T, 0.0)), 0.3) ==
        enc.params);
  CHECK(encoder_update(enc, f.frame, FeedbackPacket(1, std::vector<double>(T, 1.0)), 0.0) ==
        enc.params);
  CHECK_THROWS_AS(encoder_update(enc, f.frame, FeedbackPacket(2, std::vector<double>(T, 1.0)), 0.1),
                  ArgumentError);
  CHECK_THROWS_AS(encoder_update(enc, f.frame, FeedbackPacket(1, std::vector<double>(T - 1)), 0.1),
                  ArgumentError);

  SUBCASE("single block: phi - kappa * loss * grad log pi") {
    Frame one;
    one.tau = 5;
    one.blocks = {f.frame.blocks[2]};
    one.pilot_idx = {0};
    const double loss = 1.7, kappa = 0.2;
    const auto updated = encoder_update(enc, one, FeedbackPacket(5, {loss}), kappa);
    const auto fd = central_difference(
        [&](std::span<const double> ph) {
          return oracles::ref_policy_log_prob(enc, ph, one.blocks[0].message, one.blocks[0].x);
        },
        enc.params.values(), 1e-6);
    for (std::size_t i = 0; i < updated.size(); ++i) {
      CHECK(updated[i] == doctest::Approx(enc.params[i] - kappa * loss * fd[i]).epsilon(1e-7));
    }
  }
  SUBCASE("received blocks never enter the update") {
    Frame scrambled = f.frame;
    for (auto& b : scrambled.blocks) {
      for (auto& v : b.y) v = Complex(1e3, -1e3);
    }
    std::vector<double> losses(T);
    std::iota(losses.begin(), losses.end(), 0.5);
    CHECK(encoder_update(enc, scrambled, FeedbackPacket(1, losses), 0.1) ==
          encoder_update(enc, f.frame, FeedbackPacket(1, losses), 0.1));
  }
}

TEST_CASE("the feedback link refuses to run in the test phase") {
  CHECK_FALSE(in_test_phase());
  {
    const TestPhaseScope scope;
    CHECK(in_test_phase());
    CHECK_THROWS_AS(FeedbackPacket(1, {0.5}), std::logic_error);
  }
  CHECK_FALSE(in_test_phase());
  CHECK_NOTHROW(FeedbackPacket(1, {0.5}));
}

TEST_CASE("meta-gradient closed form equals the unrolled graph") {
  for (std::uint64_t seed = 63; seed < 68; ++seed) {
    const Fixture f(seed);
    const auto closed = meta_gradient(f.arch(), f.theta(), f.frame, f.cfg);
    const auto unrolled = meta_gradient_unrolled(f.arch(), f.theta(), f.frame, f.cfg);
    CHECK(relative_error(closed.values(), unrolled.values()) <= 1e-8);
  }
}

TEST_CASE("meta-gradient with eta = 0 is the plain outer gradient") {
  Fixture f(68);
  f.cfg.eta = 0.0;
  CHECK(meta_gradient(f.arch(), f.theta(), f.frame, f.cfg) == plain_outer_gradient(f, f.theta()));
}

TEST_CASE("first-order meta-gradient drops exactly the Hessian term") {
  Fixture f(69);
  const auto exact = meta_gradient(f.arch(), f.theta(), f.frame, f.cfg);
  TrainConfig fo = f.cfg;
  fo.first_order = true;
  const auto first = meta_gradient(f.arch(), f.theta(), f.frame, fo);
  const auto pilots = make_batch(f.frame.pilots(), f.arch());
  const auto hv = diff::grad_of_grad_dot(
      [&](diff::Graph& g, diff::Var p) { return batch_loss_sum(g, p, f.arch(), pilots); }, f.theta(),
      first);
  const double scale = f.cfg.eta / static_cast<double>(f.cfg.frame_len);
  std::vector<double> gap(exact.size()), expect(exact.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    gap[i] = first[i] - exact[i];
    expect[i] = scale * hv[i];
  }
  CHECK(relative_error(gap, expect) < 1e-10);
  CHECK(relative_error(first.values(), meta_gradient_unrolled(f.arch(), f.theta(), f.frame, fo).values()) <
        1e-10);
}

TEST_CASE("meta-gradient approaches the plain gradient linearly as eta shrinks") {
  Fixture f(70);
  const auto plain = plain_outer_gradient(f, f.theta());
  double gaps[2];
  const double etas[] = {1e-3, 1e-4};
  for (int i = 0; i < 2; ++i) {
    f.cfg.eta = etas[i];
    gaps[i] = norm_diff(meta_gradient(f.arch(), f.theta(), f.frame, f.cfg), plain);
  }
  CHECK(gaps[0] > 0.0);
  CHECK(gaps[0] / gaps[1] == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("multi-step meta-gradient matches finite differences through the adaptation") {
  Fixture f(71);
  f.cfg.adapt_steps = 2;
  const auto analytic = meta_gradient(f.arch(), f.theta(), f.frame, f.cfg);
  const auto pilots = f.frame.pilots();
  const double T = static_cast<double>(f.cfg.frame_len);
  const auto fd = central_difference(
      [&](std::span<const double> th) {
        const auto phi = adapt_decoder(f.arch(), f.theta().with_values({th.begin(), th.end()}), pilots,
                                       f.cfg.eta, 2, T);
        double total = 0.0;
        for (const auto& b : f.frame.blocks) {
          total += oracles::ref_decoder_ce(f.arch(), phi.values(), b.y, b.message);
        }
        return total / T;
      },
      f.theta().values(), 1e-5);
  CHECK(relative_error(analytic.values(), fd) <= 1e-3);
}

TEST_CASE("meta_step reports one adapted loss per block, pilots included") {
  const Fixture f(72);
  const auto step = meta_step(f.arch(), f.theta(), f.frame, f.cfg);
  CHECK(step.losses.size() == f.cfg.frame_len);
  const auto expect = block_losses(f.arch(), step.adapted, f.frame.blocks);
  CHECK(step.losses == expect);
}

TEST_CASE("meta_update is an SGD step") {
  const Fixture f(73);
  const auto g = plain_outer_gradient(f, f.theta());
  CHECK(meta_update(f.theta(), g, 0.0) == f.theta());
  CHECK(meta_update(f.theta(), g, 0.1) == diff::apply_sgd(f.theta(), g, 0.1));
}

TEST_CASE("training loops: degenerate settings") {
  TrainConfig cfg = tiny_config();
  SUBCASE("no frames returns the initial models") {
    cfg.frames = 0;
    Rng a = make_rng(74), b = make_rng(74);
    const auto init = initial_models(cfg, a);
    const auto out = run_meta_training(cfg, b);
    CHECK(out.encoder.params == init.encoder.params);
    CHECK(out.decoder.params == init.decoder.params);
    CHECK(out.history.empty());
  }
  SUBCASE("kappa = 0 freezes both sides") {
    cfg.kappa = 0.0;
    for (const bool meta : {true, false}) {
      Rng a = make_rng(75), b = make_rng(75);
      const auto init = initial_models(cfg, a);
      const auto out = meta ? run_meta_training(cfg, b) : run_joint_training(cfg, b);
      CHECK(out.encoder.params == init.encoder.params);
      CHECK(out.decoder.params == init.decoder.params);
      CHECK(out.history.size() == cfg.frames);
    }
  }
}

TEST_CASE("training is bit-reproducible for equal seeds") {
  TrainConfig cfg = tiny_config();
  auto trajectory = [&](bool meta) {
    std::vector<std::vector<double>> params;
    Rng rng = make_rng(76);
    const FrameCallback record = [&](std::uint64_t, const TrainResult& r) {
      params.emplace_back(r.decoder.params.values().begin(), r.decoder.params.values().end());
      params.emplace_back(r.encoder.params.values().begin(), r.encoder.params.values().end());
    };
    if (meta) {
      run_meta_training(cfg, rng, record);
    } else {
      run_joint_training(cfg, rng, record);
    }
    return params;
  };
  CHECK(trajectory(true) == trajectory(true));
  CHECK(trajectory(false) == trajectory(false));
  CHECK(trajectory(true).size() == 2 * (cfg.frames + 1));
}

TEST_CASE("joint training ignores eta") {
  TrainConfig a = tiny_config(), b = tiny_config();
  b.eta = 3.0;
  Rng ra = make_rng(77), rb = make_rng(77);
  const auto ha = run_joint_training(a, ra).history;
  const auto hb = run_joint_training(b, rb).history;
  REQUIRE(ha.size() == hb.size());
  for (std::size_t i = 0; i < ha.size(); ++i) CHECK(ha[i].mean_loss == hb[i].mean_loss);
}

TEST_CASE("training reduces the loss on an easy link") {
  TrainConfig cfg;
  cfg.k = 2;
  cfg.n = 2;
  cfg.taps = 1;
  cfg.frame_len = 8;
  cfg.pilots = 2;
  cfg.frames = 500;
  cfg.kappa = 0.1;
  cfg.kappa_tx = 0.001;
  cfg.eta = 0.1;
  cfg.seed = 78;
  auto window_mean = [](const std::vector<HistoryRow>& h, std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += h[i].mean_loss;
    return s / static_cast<double>(to - from);
  };
  for (const bool meta : {true, false}) {
    CAPTURE(meta);
    Rng rng = make_rng(cfg.seed);
    const auto out = meta ? run_meta_training(cfg, rng) : run_joint_training(cfg, rng);
    REQUIRE(out.history.size() == 500);
    CHECK(window_mean(out.history, 450, 500) < window_mean(out.history, 0, 50));
  }
}

TEST_CASE("BPSK transmitter keeps its codebook during training") {
  TrainConfig cfg = tiny_config();
  cfg.transmitter = Transmitter::Bpsk;
  Rng rng = make_rng(79);
  const auto out = run_meta_training(cfg, rng);
  CHECK(out.transmitter == Transmitter::Bpsk);
  CHECK(out.encoder.params.size() == 0);
  CHECK(out.history.size() == cfg.frames);
}

TEST_CASE("training a decoder from scratch") {
  Rng rng = make_rng(80);
  const auto arch = link::DecoderModel::init(1, 1, 1, rng);
  std::vector<Block> pilots(2);
  for (int m = 0; m < 2; ++m) {
    pilots[static_cast<std::size_t>(m)].message = m;
    pilots[static_cast<std::size_t>(m)].x = {Complex(m == 0 ? 1.0 : -1.0, 0.0)};
    pilots[static_cast<std::size_t>(m)].y = pilots[static_cast<std::size_t>(m)].x;
  }
  SUBCASE("zero steps is a fresh initialisation") {
    Rng a = make_rng(81), b = make_rng(81);
    const auto dec = train_decoder_from_scratch(pilots, arch, 0.1, 0, a);
    CHECK(dec.params == link::DecoderModel::init(1, 1, 1, b).params);
  }
  SUBCASE("separable pilots are learned") {
    Rng a = make_rng(82), b = make_rng(82);
    const auto dec = train_decoder_from_scratch(pilots, arch, 0.1, 500, a);
    const auto losses = block_losses(dec, dec.params, pilots);
    CHECK((losses[0] + losses[1]) / 2.0 < 0.05);
    CHECK(train_decoder_from_scratch(pilots, arch, 0.1, 500, b).params == dec.params);
  }
  CHECK_THROWS_AS(train_decoder_from_scratch(std::span<const Block>{}, arch, 0.1, 5, rng),
                  ArgumentError);
}

TEST_CASE("history CSV stream") {
  std::ostringstream out;
  const std::vector<HistoryRow> rows{{1, 0.5}, {2, 0.25}};
  write_history_csv(out, rows, "hybrid_meta", true);
  CHECK(out.str() == "tau,mean_loss,scheme\n1,0.5,hybrid_meta\n2,0.25,hybrid_meta\n");
}

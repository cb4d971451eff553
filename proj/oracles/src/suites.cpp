#include "metalink/oracles/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "metalink/baselines.hpp"
#include "metalink/channel.hpp"
#include "metalink/diff/grad.hpp"
#include "metalink/harness/evaluation.hpp"
#include "metalink/link.hpp"
#include "metalink/oracles/reference.hpp"
#include "metalink/random.hpp"
#include "metalink/training/adaptation.hpp"
#include "metalink/training/feedback.hpp"
#include "metalink/training/meta.hpp"

namespace metalink::oracles {

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ComplexVec complex_normal(std::size_t len, double var, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(var / 2.0));
  ComplexVec v(len);
  for (auto& c : v) {
    const double re = normal(rng);
    c = Complex(re, normal(rng));
  }
  return v;
}

diff::ParamVector perturbed(const diff::ParamVector& p, double sd, Rng& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> v(p.values().begin(), p.values().end());
  for (double& x : v) x += normal(rng);
  return p.with_values(std::move(v));
}

}  // namespace

CheckResult gradient_check(std::uint64_t seed, const GradientOptions& opt) {
  const Timer timer;
  CheckResult res{"gradient", true, "", 0.0};
  double worst_ce = 0.0, worst_pi = 0.0, worst_forward = 0.0;
  std::size_t largest = 0;

  for (int net = 0; net < opt.networks; ++net) {
    Rng rng = make_rng(seed, {1, static_cast<std::uint64_t>(net)});
    std::uniform_int_distribution<int> pick12(1, 2);
    std::uniform_int_distribution<int> pick_hidden(2, 4);
    const int k = pick12(rng), n = pick12(rng), taps = pick12(rng), hidden = pick_hidden(rng);

    link::DecoderModel dec = link::DecoderModel::init(k, n, taps, rng, hidden);
    dec = dec.with_params(perturbed(dec.params, 0.2, rng));
    const ComplexVec y = complex_normal(dec.input_len(), 2.0, rng);
    const int m = std::uniform_int_distribution<int>(0, (1 << k) - 1)(rng);
    const diff::Tensor received = link::stack_received(std::span(&y, 1), dec.input_len());
    const int msg[] = {m};
    const auto [ce_value, ce_grad] = diff::value_and_grad(
        [&](diff::Graph& g, diff::Var p) {
          return diff::sum(link::cross_entropy(g, p, dec, received, msg));
        },
        dec.params);
    const Vec ce_fd = central_difference(
        [&](std::span<const double> th) { return ref_decoder_ce(dec, th, y, m); },
        dec.params.values(), opt.step);
    worst_ce = std::max(worst_ce, relative_error(ce_grad.values(), ce_fd));
    worst_forward =
        std::max(worst_forward, std::abs(ce_value - ref_decoder_ce(dec, dec.params.values(), y, m)));

    const double sigma = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
    link::EncoderModel enc = link::EncoderModel::init(k, n, 1.0, sigma, rng, hidden);
    enc.params = perturbed(enc.params, 0.2, rng);
    const ComplexVec x = complex_normal(static_cast<std::size_t>(n), 2.0, rng);
    const diff::Tensor cw(1, 2 * x.size(), link::interleave(x));
    const auto [pi_value, pi_grad] = diff::value_and_grad(
        [&](diff::Graph& g, diff::Var p) {
          return diff::sum(link::policy_log_prob(g, p, enc, msg, cw));
        },
        enc.params);
    const Vec pi_fd = central_difference(
        [&](std::span<const double> ph) { return ref_policy_log_prob(enc, ph, m, x); },
        enc.params.values(), opt.step);
    worst_pi = std::max(worst_pi, relative_error(pi_grad.values(), pi_fd));
    worst_forward = std::max(
        worst_forward, std::abs(pi_value - ref_policy_log_prob(enc, enc.params.values(), m, x)));
    largest = std::max({largest, dec.params.size(), enc.params.size()});
  }

  res.passed = worst_ce <= opt.tol && worst_pi <= opt.tol && worst_forward <= 1e-9 && largest <= 200;
  res.detail = fmt(
      "%d networks (<= %zu params): max rel err cross-entropy %.2e, policy log-prob %.2e "
      "(limit %.0e); forward mismatch %.1e",
      opt.networks, largest, worst_ce, worst_pi, opt.tol, worst_forward);
  res.seconds = timer.seconds();
  return res;
}

CheckResult meta_gradient_check(std::uint64_t seed, const MetaOptions& opt) {
  const Timer timer;
  CheckResult res{"meta-gradient", true, "", 0.0};
  double worst = 0.0, worst_eta0 = 0.0;

  for (int inst = 0; inst < opt.instances; ++inst) {
    Rng rng = make_rng(seed, {2, static_cast<std::uint64_t>(inst)});
    training::TrainConfig cfg;
    cfg.k = 2;
    cfg.n = 2;
    cfg.taps = 2;
    cfg.frame_len = 4;
    cfg.pilots = 2;
    cfg.eta = opt.eta;
    cfg.adapt_steps = 1;

    link::DecoderModel dec = link::DecoderModel::init(cfg.k, cfg.n, cfg.taps, rng);
    dec = dec.with_params(perturbed(dec.params, 0.2, rng));
    const link::EncoderModel enc = link::EncoderModel::init(cfg.k, cfg.n, 1.0, 0.15, rng);
    auto state = channel::make_state(2, 0.9, cfg.frame_len, cfg.n0(), 1.0, rng);

    training::Frame frame;
    frame.tau = 1;
    frame.pilot_idx = {0, 1};
    std::uniform_int_distribution<int> pick(0, 3);
    for (std::size_t t = 0; t < cfg.frame_len; ++t) {
      training::Block b;
      b.message = pick(rng);
      b.x = link::sample_codeword(enc, b.message, rng);
      b.y = channel::transmit(state, b.x, rng);
      frame.blocks.push_back(std::move(b));
    }
    const auto pilots = frame.pilots();
    const double T = static_cast<double>(cfg.frame_len);

    const auto analytic = training::meta_gradient(dec, dec.params, frame, cfg);
    const Vec fd = central_difference(
        [&](std::span<const double> th) {
          const auto theta = dec.params.with_values(Vec(th.begin(), th.end()));
          const auto phi = training::adapt_decoder(dec, theta, pilots, cfg.eta, 1, T);
          double total = 0.0;
          for (const auto& b : frame.blocks) {
            total += ref_decoder_ce(dec, phi.values(), b.y, b.message);
          }
          return total / T;
        },
        dec.params.values(), opt.step);
    worst = std::max(worst, relative_error(analytic.values(), fd));

    training::TrainConfig cfg0 = cfg;
    cfg0.eta = 0.0;
    const auto meta0 = training::meta_gradient(dec, dec.params, frame, cfg0);
    const auto batch = training::make_batch(frame.blocks, dec);
    const auto plain = diff::grad(
        [&](diff::Graph& g, diff::Var p) {
          return (1.0 / T) *
                 diff::sum(link::cross_entropy(g, p, dec, batch.received, batch.messages));
        },
        dec.params);
    worst_eta0 = std::max(worst_eta0, max_abs_diff(meta0.values(), plain.values()));
  }

  res.passed = worst <= opt.tol && worst_eta0 <= opt.eta0_tol;
  res.detail = fmt(
      "%d frames (k=2, n=2, L=2, T=4, T_U=2): max rel err vs finite differences %.2e (limit %.0e); "
      "eta=0 vs plain gradient max abs diff %.1e (limit %.0e)",
      opt.instances, worst, opt.tol, worst_eta0, opt.eta0_tol);
  res.seconds = timer.seconds();
  return res;
}

CheckResult policy_gradient_check(std::uint64_t seed, const PolicyOptions& opt) {
  const Timer timer;
  CheckResult res{"policy-gradient", true, "", 0.0};
  Rng rng = make_rng(seed, {3});

  link::EncoderModel enc = link::EncoderModel::init(1, 1, 1.0, opt.sigma, rng);
  enc.params = perturbed(enc.params, 0.3, rng);
  link::DecoderModel dec = link::DecoderModel::init(1, 1, 1, rng);
  dec = dec.with_params(perturbed(dec.params, 0.5, rng));
  const ComplexVec unit_tap{Complex(1.0, 0.0)};

  // E_m E_x[loss] on a fixed grid around each message's mean. The losses do
  // not depend on phi, so differencing only moves the Gaussian weights.
  const double a = std::sqrt(1.0 - opt.sigma * opt.sigma);
  const double var = opt.sigma * opt.sigma;
  const auto half = static_cast<int>(std::ceil(opt.grid_radius * opt.sigma / opt.grid_step));
  struct Node {
    double re, im, loss;
  };
  std::vector<Node> grid[2];
  for (int m = 0; m < 2; ++m) {
    const Vec f = ref_encode(enc, enc.params.values(), m);
    for (int i = -half; i <= half; ++i) {
      for (int j = -half; j <= half; ++j) {
        const Complex x(a * f[0] + i * opt.grid_step, a * f[1] + j * opt.grid_step);
        grid[m].push_back(
            {x.real(), x.imag(), ref_decoder_ce(dec, dec.params.values(), std::span(&x, 1), m)});
      }
    }
  }
  auto expected_loss = [&](std::span<const double> phi) {
    double total = 0.0;
    for (int m = 0; m < 2; ++m) {
      const Vec f = ref_encode(enc, phi, m);
      for (const Node& node : grid[m]) {
        const double dr = node.re - a * f[0], di = node.im - a * f[1];
        total += node.loss * std::exp(-(dr * dr + di * di) / (2.0 * var));
      }
    }
    return total * opt.grid_step * opt.grid_step / (2.0 * 2.0 * std::numbers::pi * var);
  };
  const Vec fd = central_difference(expected_loss, enc.params.values(), opt.step);

  // Frame-level means of loss * grad log pi via the encoder update with kappa = 1.
  const std::size_t frames = std::max<std::size_t>(2, opt.samples / opt.per_frame);
  const std::size_t dim = enc.params.size();
  std::vector<Vec> per_param(dim, Vec(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    training::Frame frame;
    frame.tau = f + 1;
    frame.pilot_idx = {0};
    std::vector<ComplexVec> ys;
    for (std::size_t t = 0; t < opt.per_frame; ++t) {
      training::Block b;
      b.message = static_cast<int>(t % 2);
      b.x = link::sample_codeword(enc, b.message, rng);
      b.y = channel::convolve(unit_tap, b.x);
      ys.push_back(b.y);
      frame.blocks.push_back(std::move(b));
    }
    const auto probs = link::decode_probs_batch(dec, ys);
    std::vector<double> losses(opt.per_frame);
    for (std::size_t t = 0; t < opt.per_frame; ++t) {
      losses[t] = link::cross_entropy(probs[t], frame.blocks[t].message);
    }
    const training::FeedbackPacket fb(frame.tau, std::move(losses));
    const auto updated = training::encoder_update(enc, frame, fb, 1.0);
    for (std::size_t i = 0; i < dim; ++i) per_param[i][f] = enc.params[i] - updated[i];
  }

  double worst_z = 0.0;
  double norm_fd = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const MeanSe est = mean_se(per_param[i]);
    const double z = est.se > 0.0 ? std::abs(est.mean - fd[i]) / est.se
                                  : (est.mean == fd[i] ? 0.0 : INFINITY);
    worst_z = std::max(worst_z, z);
    norm_fd += fd[i] * fd[i];
  }
  res.passed = worst_z <= opt.z;
  res.detail = fmt(
      "%zu samples, %zu parameters, |grad E[loss]| = %.3g: max |estimate - finite difference| "
      "= %.2f standard errors (limit %.1f)",
      frames * opt.per_frame, dim, std::sqrt(norm_fd), worst_z, opt.z);
  res.seconds = timer.seconds();
  return res;
}

CheckResult bpsk_ml_check(std::uint64_t seed, const BpskOptions& opt) {
  const Timer timer;
  CheckResult res{"bpsk-ml", true, "", 0.0};
  const auto scheme =
      harness::make_bpsk_ml_scheme(opt.bits, opt.bits, 1, 1.0, harness::Csi::Perfect);
  const harness::LinkSetup setup{opt.bits, opt.bits, 1, 1.0, opt.es_n0_db};
  harness::TestConfig test;
  test.pilots = 0;
  test.payload_blocks = opt.blocks;
  test.test_frames = 1000;
  test.fading = harness::Fading::Unit;
  Rng rng = make_rng(seed, {4});
  const auto est = harness::evaluate_bler(*scheme, setup, test, rng);

  const double p = bpsk_block_error(opt.es_n0_db, opt.bits);
  const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(est.blocks));
  const double z = std::abs(est.bler - p) / se;
  res.passed = z <= opt.z;
  res.detail = fmt("%zu blocks: BLER %.4e (%zu errors) vs analytic %.4e, %.2f standard errors (limit %.1f)",
                   est.blocks, est.bler, est.errors, p, z, opt.z);
  res.seconds = timer.seconds();
  return res;
}

CheckResult channel_statistics_check(std::uint64_t seed, const ChannelOptions& opt) {
  const Timer timer;
  CheckResult res{"channel-statistics", true, "", 0.0};
  const double target_var = 1.0 / static_cast<double>(opt.taps);
  std::string detail;

  for (std::size_t ri = 0; ri < opt.rhos.size(); ++ri) {
    const double rho = opt.rhos[ri];
    Rng rng = make_rng(seed, {5, ri});
    const std::size_t count = opt.chains * opt.taps;
    Vec power(count), prev_power(count), cross(count);
    for (std::size_t c = 0; c < opt.chains; ++c) {
      auto state = channel::make_state(opt.taps, rho, 1, 1.0, 1.0, rng);
      ComplexVec prev = state.taps;
      for (std::size_t s = 0; s < opt.advances; ++s) {
        if (s + 1 == opt.advances) prev = state.taps;
        state = channel::advance(std::move(state), rng);
      }
      for (std::size_t l = 0; l < opt.taps; ++l) {
        const std::size_t i = c * opt.taps + l;
        power[i] = std::norm(state.taps[l]);
        prev_power[i] = std::norm(prev[l]);
        cross[i] = (state.taps[l] * std::conj(prev[l])).real();
      }
    }

    const MeanSe var = mean_se(power);
    const double z_var = std::abs(var.mean - target_var) / var.se;

    // r = A / sqrt(B C) with A, B, C sample means; delta-method error.
    const double n = static_cast<double>(count);
    const double A = std::accumulate(cross.begin(), cross.end(), 0.0) / n;
    const double B = std::accumulate(prev_power.begin(), prev_power.end(), 0.0) / n;
    const double C = var.mean;
    const double r = A / std::sqrt(B * C);
    const double g[3] = {1.0 / std::sqrt(B * C), -r / (2.0 * B), -r / (2.0 * C)};
    const double mean3[3] = {A, B, C};
    const Vec* cols[3] = {&cross, &prev_power, &power};
    double var_r = 0.0;
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) {
        double cov = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
          cov += ((*cols[p])[i] - mean3[p]) * ((*cols[q])[i] - mean3[q]);
        }
        var_r += g[p] * g[q] * cov / (n - 1.0);
      }
    }
    const double se_r = std::sqrt(var_r / n);
    const double z_r = std::abs(r - rho) / se_r;

    res.passed = res.passed && z_var <= opt.z && z_r <= opt.z;
    detail += fmt("%srho=%.2f: var %.5f (%.2f se), corr %.4f (%.2f se)", ri ? "; " : "", rho,
                  var.mean, z_var, r, z_r);
  }
  res.detail = fmt("%zu chains x %zu advances, L=%zu, target var %.5f, limit %.1f se: ", opt.chains,
                   opt.advances, opt.taps, target_var, opt.z) +
               detail;
  res.seconds = timer.seconds();
  return res;
}

CheckResult mmse_check(std::uint64_t seed, const MmseOptions& opt) {
  const Timer timer;
  CheckResult res{"mmse", true, "", 0.0};

  double worst_residual = 0.0;
  for (int inst = 0; inst < opt.noiseless_instances; ++inst) {
    Rng rng = make_rng(seed, {6, static_cast<std::uint64_t>(inst)});
    const std::size_t taps = 1 + static_cast<std::size_t>(inst % 3);
    const std::size_t count = 1 + static_cast<std::size_t>(inst % 4);
    const ComplexVec h = channel::draw_stationary_taps(taps, rng);
    std::vector<baselines::PilotPair> pilots;
    for (std::size_t p = 0; p < count; ++p) {
      const ComplexVec x = complex_normal(4, 1.0, rng);
      pilots.push_back({x, ref_convolve(h, x)});
    }
    const ComplexVec est = baselines::mmse_estimate(pilots, 1e-14, taps);
    double sq = 0.0;
    for (std::size_t l = 0; l < taps; ++l) sq += std::norm(est[l] - h[l]);
    worst_residual = std::max(worst_residual, std::sqrt(sq));
  }

  // Nested pilot sets so successive MSEs are paired.
  constexpr std::size_t kCounts[] = {1, 2, 4, 8};
  constexpr int k = 4;
  constexpr std::size_t taps = 2;
  const double n0 = channel::snr_to_n0(10.0, 1.0);
  std::vector<Vec> err(4, Vec(opt.trials));
  Rng rng = make_rng(seed, {6, 1000});
  std::vector<int> msgs(std::size_t{1} << k);
  for (std::size_t t = 0; t < opt.trials; ++t) {
    const ComplexVec h = channel::draw_stationary_taps(taps, rng);
    std::iota(msgs.begin(), msgs.end(), 0);
    std::shuffle(msgs.begin(), msgs.end(), rng);
    std::vector<baselines::PilotPair> pilots;
    for (std::size_t p = 0; p < 8; ++p) {
      const ComplexVec x = baselines::bpsk_encode(msgs[p], k, k, 1.0);
      ComplexVec y = ref_convolve(h, x);
      const ComplexVec w = complex_normal(y.size(), n0, rng);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += w[i];
      pilots.push_back({x, y});
    }
    for (std::size_t c = 0; c < 4; ++c) {
      const ComplexVec est =
          baselines::mmse_estimate(std::span(pilots).first(kCounts[c]), n0, taps);
      double sq = 0.0;
      for (std::size_t l = 0; l < taps; ++l) sq += std::norm(est[l] - h[l]);
      err[c][t] = sq;
    }
  }
  std::string mse_text;
  bool monotone = true;
  for (std::size_t c = 0; c < 4; ++c) {
    mse_text += fmt("%sP=%zu %.3e", c ? ", " : "", kCounts[c], mean_se(err[c]).mean);
    if (c == 0) continue;
    Vec d(opt.trials);
    for (std::size_t t = 0; t < opt.trials; ++t) d[t] = err[c - 1][t] - err[c][t];
    const MeanSe gap = mean_se(d);
    if (!(gap.mean > opt.z * gap.se)) monotone = false;
  }

  res.passed = worst_residual <= opt.residual_tol && monotone;
  res.detail = fmt("noiseless residual max %.1e (limit %.0e); MSE over %zu trials: ", worst_residual,
                   opt.residual_tol, opt.trials) +
               mse_text + (monotone ? " (each drop > 3 se)" : " (not monotone at 3 se)");
  res.seconds = timer.seconds();
  return res;
}

std::vector<CheckResult> run_all(std::uint64_t seed, const ReportFn& report) {
  std::vector<CheckResult> out;
  auto add = [&](CheckResult r) {
    if (report) report(r);
    out.push_back(std::move(r));
  };
  add(gradient_check(seed));
  add(meta_gradient_check(seed));
  add(policy_gradient_check(seed));
  add(bpsk_ml_check(seed));
  add(channel_statistics_check(seed));
  add(mmse_check(seed));
  return out;
}

}  // namespace metalink::oracles

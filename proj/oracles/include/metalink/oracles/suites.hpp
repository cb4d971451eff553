#pragma once

// Oracle suites: each compares a library result against an independent
// computation (finite differences, quadrature, analytic formulas, Monte
// Carlo with standard errors) and reports pass/fail with the measured gap.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace metalink::oracles {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct GradientOptions {
  int networks = 100;
  double tol = 1e-5;   // relative error bound
  double step = 1e-5;  // central-difference step
};
// Cross-entropy and policy log-prob gradients of random small networks.
CheckResult gradient_check(std::uint64_t seed, const GradientOptions& opt = {});

struct MetaOptions {
  int instances = 3;
  double eta = 0.1;
  double tol = 1e-3;
  double step = 1e-4;
  double eta0_tol = 1e-10;
};
// Meta-gradient vs finite differences of the loss after adaptation on a
// k=2, n=2, L=2 link with T=4, T_U=2; and eta=0 vs the plain gradient.
CheckResult meta_gradient_check(std::uint64_t seed, const MetaOptions& opt = {});

struct PolicyOptions {
  std::size_t samples = 1'000'000;
  std::size_t per_frame = 1000;
  double sigma = 0.3;
  double grid_step = 0.01;   // integration grid spacing
  double grid_radius = 8.0;  // grid half-width in units of sigma
  double step = 1e-4;
  double z = 3.0;
};
// REINFORCE encoder update on the k=1, n=1, L=1 toy vs finite differences
// of the expected loss integrated on a fine grid.
CheckResult policy_gradient_check(std::uint64_t seed, const PolicyOptions& opt = {});

struct BpskOptions {
  std::size_t blocks = 1'000'000;
  double es_n0_db = 10.0;
  int bits = 8;
  double z = 3.0;
};
// BPSK + exhaustive ML with the true unit tap vs the analytic block error.
CheckResult bpsk_ml_check(std::uint64_t seed, const BpskOptions& opt = {});

struct ChannelOptions {
  std::size_t chains = 10'000;
  std::size_t advances = 1000;
  std::size_t taps = 3;
  std::vector<double> rhos{0.0, 0.5, 0.95};
  double z = 3.0;
};
// Tap variance 1/L and lag-1 frame correlation rho over chain ensembles.
CheckResult channel_statistics_check(std::uint64_t seed, const ChannelOptions& opt = {});

struct MmseOptions {
  int noiseless_instances = 20;
  double residual_tol = 1e-6;
  std::size_t trials = 4000;
  double z = 3.0;
};
// Noiseless recovery and MSE decreasing over P in {1, 2, 4, 8}.
CheckResult mmse_check(std::uint64_t seed, const MmseOptions& opt = {});

using ReportFn = std::function<void(const CheckResult&)>;

// Every suite above at its default size, in order.
std::vector<CheckResult> run_all(std::uint64_t seed, const ReportFn& report = {});

}  // namespace metalink::oracles

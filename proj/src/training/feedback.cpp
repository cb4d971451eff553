#include "metalink/training/feedback.hpp"

#include <stdexcept>

#include "metalink/diff/grad.hpp"
#include "metalink/errors.hpp"

namespace metalink::training {

namespace {
thread_local bool g_test_phase = false;
}

bool in_test_phase() noexcept { return g_test_phase; }

TestPhaseScope::TestPhaseScope() : previous_(g_test_phase) { g_test_phase = true; }
TestPhaseScope::~TestPhaseScope() { g_test_phase = previous_; }

FeedbackPacket::FeedbackPacket(std::uint64_t t, std::vector<double> l)
    : tau(t), losses(std::move(l)) {
  if (g_test_phase) throw std::logic_error("feedback link used during the test phase");
}

diff::ParamVector encoder_update(const link::EncoderModel& enc, const Frame& frame,
                                 const FeedbackPacket& feedback, double kappa) {
  if (feedback.tau != frame.tau) {
    throw ArgumentError("feedback for frame " + std::to_string(feedback.tau) +
                        " applied to frame " + std::to_string(frame.tau));
  }
  if (feedback.losses.size() != frame.blocks.size()) {
    throw ArgumentError("feedback must carry one loss per block");
  }
  if (frame.blocks.empty()) throw ArgumentError("empty frame");
  if (!(kappa >= 0.0)) throw ArgumentError("kappa must be non-negative");

  const std::size_t T = frame.blocks.size();
  const std::size_t width = 2 * static_cast<std::size_t>(enc.n);
  std::vector<int> messages(T);
  diff::Tensor codewords(T, width);
  for (std::size_t t = 0; t < T; ++t) {
    const Block& b = frame.blocks[t];
    if (b.x.size() != static_cast<std::size_t>(enc.n)) {
      throw ShapeError("transmitted codeword length must be n");
    }
    messages[t] = b.message;
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      codewords(t, 2 * i) = b.x[i].real();
      codewords(t, 2 * i + 1) = b.x[i].imag();
    }
  }
  const diff::Tensor weights(T, 1, feedback.losses);

  const diff::Objective surrogate = [&](diff::Graph& g, diff::Var p) {
    const diff::Var logp = link::policy_log_prob(g, p, enc, messages, codewords);
    return (1.0 / static_cast<double>(T)) * diff::dot(g.constant(weights), logp);
  };
  return diff::apply_sgd(enc.params, diff::grad(surrogate, enc.params), kappa);
}

}  // namespace metalink::training

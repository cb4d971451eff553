#pragma once

// Training-phase feedback link and the transmitter update it enables. The
// test phase must not reach this header; evaluation code asserts as much.
#define METALINK_TRAINING_FEEDBACK_HPP 1

#include <cstdint>
#include <vector>

#include "metalink/diff/param_vector.hpp"
#include "metalink/link.hpp"
#include "metalink/training/frame.hpp"
#include "metalink/training/phase.hpp"

namespace metalink::training {

// Per-block log-losses for frame `tau`, sent receiver -> transmitter.
// Constructing one while a TestPhaseScope is active throws std::logic_error.
struct FeedbackPacket {
  std::uint64_t tau = 0;
  std::vector<double> losses;

  FeedbackPacket(std::uint64_t tau, std::vector<double> losses);
};

// One policy-gradient step on the encoder:
//   phi_T - (kappa / T) sum_t loss_t grad log pi(x_t | m_t).
// Reads only the messages and transmitted codewords of the frame; the
// received blocks never enter the transmitter update.
diff::ParamVector encoder_update(const link::EncoderModel& enc, const Frame& frame,
                                 const FeedbackPacket& feedback, double kappa);

}  // namespace metalink::training

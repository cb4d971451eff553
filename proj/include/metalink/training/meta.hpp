#pragma once

#include <vector>

#include "metalink/diff/param_vector.hpp"
#include "metalink/link.hpp"
#include "metalink/training/frame.hpp"

namespace metalink::training {

// Result of one receiver meta-step on a frame.
struct MetaStep {
  diff::ParamVector gradient;  // d/dtheta of the outer loss after adaptation
  diff::ParamVector adapted;   // phi_R = U(theta_R)
  std::vector<double> losses;  // per-block -log p_phi(m | y), all T blocks
};

// Outer loss: mean over all T blocks of the frame (pilots included) of the
// cross-entropy of the adapted decoder. With adapt_steps == 1 the gradient
// is (I - (eta/T) H_pilot(theta)) grad outer(phi), the Hessian-vector
// product taken by exact double backward; otherwise the adaptation is
// unrolled and differentiated through. first_order drops the Hessian term.
MetaStep meta_step(const link::DecoderModel& arch, const diff::ParamVector& theta,
                   const Frame& frame, const TrainConfig& cfg);

diff::ParamVector meta_gradient(const link::DecoderModel& arch, const diff::ParamVector& theta,
                                const Frame& frame, const TrainConfig& cfg);

// One graph through the unrolled adaptation and the outer loss. Independent
// of the closed form above; any adapt_steps.
diff::ParamVector meta_gradient_unrolled(const link::DecoderModel& arch,
                                         const diff::ParamVector& theta, const Frame& frame,
                                         const TrainConfig& cfg);

diff::ParamVector meta_update(const diff::ParamVector& theta, const diff::ParamVector& grad,
                              double kappa);

}  // namespace metalink::training

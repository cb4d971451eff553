#pragma once

#include <functional>
#include <utility>

#include "metalink/diff/graph.hpp"
#include "metalink/diff/param_vector.hpp"

namespace metalink::diff {

// Builds a scalar-valued graph from the bound parameter row vector.
using Objective = std::function<Var(Graph&, Var params)>;

// df/dp with the layout of p. Throws ShapeError when f is not scalar and
// NumericError when a forward value is not finite.
ParamVector grad(const Objective& f, const ParamVector& p);

std::pair<double, ParamVector> value_and_grad(const Objective& f,
                                              const ParamVector& p);

// H(p) v, obtained by differentiating <grad f(p), v> with v held constant
// (exact double backward, no finite differences).
ParamVector grad_of_grad_dot(const Objective& f, const ParamVector& p,
                             const ParamVector& v);

// p - lr * g. Requires matching layouts and lr >= 0.
ParamVector apply_sgd(const ParamVector& p, const ParamVector& g, double lr);

// Flattens a 1 x N (or N x 1) node value into a vector with p's layout.
ParamVector as_params(const Var& v, const ParamVector& like);

}  // namespace metalink::diff

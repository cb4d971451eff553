#include "metalink/diff/grad.hpp"

#include <array>

#include "metalink/errors.hpp"

namespace metalink::diff {

namespace {

Var checked_objective(const Objective& f, Graph& g, Var params) {
  Var out = f(g, params);
  if (!out.valid() || &out.graph() != &g) {
    throw ShapeError("objective returned a node from another graph");
  }
  if (out.value().size() != 1) {
    throw ShapeError("objective must return a scalar node");
  }
  return out;
}

}  // namespace

ParamVector as_params(const Var& v, const ParamVector& like) {
  const Tensor& t = v.value();
  if (t.size() != like.size()) {
    throw ShapeError("gradient size does not match parameter vector");
  }
  return like.with_values(t.data);
}

std::pair<double, ParamVector> value_and_grad(const Objective& f,
                                              const ParamVector& p) {
  Graph g;
  const Var params = bind(g, p);
  const Var out = checked_objective(f, g, params);
  const std::array<Var, 1> wrt{params};
  const auto grads = g.backward(out, wrt);
  return {out.scalar(), as_params(grads[0], p)};
}

ParamVector grad(const Objective& f, const ParamVector& p) {
  return value_and_grad(f, p).second;
}

ParamVector grad_of_grad_dot(const Objective& f, const ParamVector& p,
                             const ParamVector& v) {
  if (!p.same_layout(v)) throw ShapeError("grad_of_grad_dot: v layout differs from p");
  Graph g;
  const Var params = bind(g, p);
  const Var out = checked_objective(f, g, params);
  const std::array<Var, 1> wrt{params};
  const Var first = g.backward(out, wrt)[0];
  const Var direction = bind_constant(g, v);
  const Var inner = dot(first, direction);
  return as_params(g.backward(inner, wrt)[0], p);
}

ParamVector apply_sgd(const ParamVector& p, const ParamVector& g, double lr) {
  if (!p.same_layout(g)) throw ShapeError("apply_sgd: gradient layout differs");
  if (!(lr >= 0.0)) throw ArgumentError("apply_sgd: learning rate must be non-negative");
  std::vector<double> out(p.values().begin(), p.values().end());
  const auto gv = g.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * gv[i];
  return p.with_values(std::move(out));
}

}  // namespace metalink::diff

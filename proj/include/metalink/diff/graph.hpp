#pragma once

// Reverse-mode differentiation over small dense real matrices.
//
// Every backward rule is written in terms of graph operations, so the
// adjoints produced by Graph::backward are themselves nodes of the same graph
// and can be differentiated again. That is what makes Hessian-vector products
// and differentiation through an SGD step possible.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace metalink::diff {

// Row-major dense matrix. Vectors are 1xN or Nx1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);

  std::size_t size() const noexcept { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
};

using IndexMap = std::shared_ptr<const std::vector<std::uint32_t>>;

enum class Op : std::uint8_t {
  Input,
  Add,
  Sub,
  Mul,
  Scale,
  Shift,
  MatMul,
  Gather,
  ScatterAdd,
  Tanh,
  Exp,
  Log,
  Reciprocal,
  Sqrt,
  Elu,
  FloorMax,
  Softmax,
  SoftmaxXent,
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while the graph
// lives.
class Var {
 public:
  Var() = default;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  // Value of a 1x1 node.
  double scalar() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var variable(Tensor value) { return input(std::move(value), true); }
  Var constant(Tensor value) { return input(std::move(value), false); }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Op op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t parent(std::size_t id, int which) const;

  // Adjoints of the scalar `output` with respect to each of `wrt`. The result
  // nodes live in this graph; differentiate them again for higher orders.
  // Nodes in `wrt` that `output` does not depend on get a zero constant.
  std::vector<Var> backward(Var output, std::span<const Var> wrt);

  // Node construction. Prefer the free functions below.
  Var make(Op op, Var a, Var b, double c, int order, IndexMap aux, Tensor value);

 private:
  struct Node {
    Op op = Op::Input;
    std::int8_t order = 0;
    bool requires_grad = false;
    std::int64_t a = -1;
    std::int64_t b = -1;
    double c = 0.0;
    IndexMap aux;
    Tensor value;
  };

  Var input(Tensor value, bool requires_grad);
  void check_finite(std::size_t id) const;
  void accumulate(std::vector<std::int64_t>& adj, std::int64_t target, Var contribution);
  void backprop_node(std::size_t id, Var g, std::vector<std::int64_t>& adj);

  std::vector<Node> nodes_;
};

// Elementwise arithmetic on equal shapes.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator*(double c, Var a);
Var operator*(Var a, double c);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);

// op(a) * op(b) where op transposes when the flag is set.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);

// out.flat[i] = x.flat[idx[i]], out has shape rows x cols.
Var gather(Var x, IndexMap idx, std::size_t rows, std::size_t cols);
// out.flat[idx[i]] += x.flat[i], out has shape rows x cols (zero-initialised).
Var scatter_add(Var x, IndexMap idx, std::size_t rows, std::size_t cols);

Var tanh(Var x);
Var exp(Var x);
Var log(Var x);
Var reciprocal(Var x);
Var sqrt(Var x);
// order 0 is ELU(alpha=1); order 1 its derivative; order >= 2 the second
// derivative (which is its own derivative).
Var elu(Var x, int order = 0);
// max(x, floor) elementwise, gradient zero where the floor is active.
Var floor_max(Var x, double floor);
// Row-wise softmax.
Var softmax(Var logits);
// Row-wise fused softmax cross-entropy; returns rows x 1 losses
// -log softmax(logits)[r, labels[r]].
Var softmax_xent(Var logits, IndexMap labels);

// Derived helpers, all expressed through the primitives above.
Var sum(Var x);
Var row_sum(Var x);
Var broadcast_cols(Var column, std::size_t cols);
Var broadcast_rows(Var row, std::size_t rows);
Var select_cols(Var x, std::span<const std::size_t> cols);
Var place_cols(Var x, std::span<const std::size_t> cols, std::size_t total_cols);
Var transpose(Var x);
Var reshape(Var x, std::size_t rows, std::size_t cols);
Var dot(Var a, Var b);

IndexMap make_index(std::vector<std::uint32_t> idx);

}  // namespace metalink::diff

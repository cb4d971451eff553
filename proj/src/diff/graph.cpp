#include "metalink/diff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "metalink/errors.hpp"

namespace metalink::diff {

namespace {

constexpr int kTransA = 1;
constexpr int kTransB = 2;

void require_same_graph(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph()) {
    throw ShapeError("operands belong to different graphs");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                     " vs " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols));
  }
}

template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
  return out;
}

template <typename F>
Tensor zip_values(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
  return out;
}

Var unary(Op op, Var x, Tensor value, double c = 0.0, int order = 0,
          IndexMap aux = nullptr) {
  return x.graph().make(op, x, Var{}, c, order, std::move(aux), std::move(value));
}

Var binary(Op op, Var a, Var b, Tensor value, int order = 0) {
  require_same_graph(a, b);
  return a.graph().make(op, a, b, 0.0, order, nullptr, std::move(value));
}

Tensor softmax_rows(const Tensor& z) {
  Tensor out(z.rows, z.cols);
  for (std::size_t r = 0; r < z.rows; ++r) {
    const double* in = &z.data[r * z.cols];
    double* o = &out.data[r * z.cols];
    const double mx = *std::max_element(in, in + z.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < z.cols; ++j) o[j] /= total;
  }
  return out;
}

}  // namespace

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ShapeError("tensor data does not match shape");
}

const Tensor& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on a non-scalar node");
  return v.data[0];
}

IndexMap make_index(std::vector<std::uint32_t> idx) {
  return std::make_shared<const std::vector<std::uint32_t>>(std::move(idx));
}

std::size_t Graph::parent(std::size_t id, int which) const {
  const auto p = which == 0 ? nodes_[id].a : nodes_[id].b;
  return p < 0 ? std::numeric_limits<std::size_t>::max()
               : static_cast<std::size_t>(p);
}

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::Input;
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  check_finite(nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::make(Op op, Var a, Var b, double c, int order, IndexMap aux,
                Tensor value) {
  Node n;
  n.op = op;
  n.order = static_cast<std::int8_t>(order);
  n.c = c;
  n.aux = std::move(aux);
  n.value = std::move(value);
  if (a.valid()) {
    if (&a.graph() != this) throw ShapeError("operand from another graph");
    n.a = static_cast<std::int64_t>(a.id());
    n.requires_grad = nodes_[a.id()].requires_grad;
  }
  if (b.valid()) {
    if (&b.graph() != this) throw ShapeError("operand from another graph");
    n.b = static_cast<std::int64_t>(b.id());
    n.requires_grad = n.requires_grad || nodes_[b.id()].requires_grad;
  }
  nodes_.push_back(std::move(n));
  check_finite(nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

void Graph::check_finite(std::size_t id) const {
  for (double v : nodes_[id].value.data) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite value produced at graph node " +
                             std::to_string(id),
                         id);
    }
  }
}

void Graph::accumulate(std::vector<std::int64_t>& adj, std::int64_t target,
                       Var contribution) {
  if (adj[target] < 0) {
    adj[target] = static_cast<std::int64_t>(contribution.id());
  } else {
    adj[target] = static_cast<std::int64_t>(
        (Var(this, static_cast<std::size_t>(adj[target])) + contribution).id());
  }
}

std::vector<Var> Graph::backward(Var output, std::span<const Var> wrt) {
  if (!output.valid() || &output.graph() != this) {
    throw ShapeError("backward: output is not a node of this graph");
  }
  if (output.value().size() != 1) {
    throw ShapeError("backward: objective must be a scalar, got " +
                     std::to_string(output.rows()) + "x" +
                     std::to_string(output.cols()));
  }
  const std::size_t end = output.id();
  std::size_t stop = end;
  for (const Var& w : wrt) {
    if (&w.graph() != this) throw ShapeError("backward: wrt from another graph");
    stop = std::min(stop, w.id());
  }

  std::vector<std::int64_t> adj(end + 1, -1);
  adj[end] = static_cast<std::int64_t>(constant(Tensor(1, 1, 1.0)).id());
  for (std::size_t i = end + 1; i-- > stop;) {
    if (adj[i] < 0 || !nodes_[i].requires_grad || nodes_[i].op == Op::Input) {
      continue;
    }
    backprop_node(i, Var(this, static_cast<std::size_t>(adj[i])), adj);
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id() <= end && adj[w.id()] >= 0) {
      result.emplace_back(this, static_cast<std::size_t>(adj[w.id()]));
    } else {
      result.push_back(constant(Tensor(w.rows(), w.cols())));
    }
  }
  return result;
}

void Graph::backprop_node(std::size_t id, Var g, std::vector<std::int64_t>& adj) {
  // Copy what we need: make() may reallocate nodes_.
  const Op op = nodes_[id].op;
  const int order = nodes_[id].order;
  const double c = nodes_[id].c;
  const IndexMap aux = nodes_[id].aux;
  const std::int64_t ia = nodes_[id].a;
  const std::int64_t ib = nodes_[id].b;
  const bool need_a = ia >= 0 && nodes_[ia].requires_grad;
  const bool need_b = ib >= 0 && nodes_[ib].requires_grad;
  const Var A = ia >= 0 ? Var(this, ia) : Var{};
  const Var B = ib >= 0 ? Var(this, ib) : Var{};
  const Var Y(this, id);

  switch (op) {
    case Op::Input:
      break;
    case Op::Add:
      if (need_a) accumulate(adj, ia, g);
      if (need_b) accumulate(adj, ib, g);
      break;
    case Op::Sub:
      if (need_a) accumulate(adj, ia, g);
      if (need_b) accumulate(adj, ib, -g);
      break;
    case Op::Mul:
      if (need_a) accumulate(adj, ia, g * B);
      if (need_b) accumulate(adj, ib, g * A);
      break;
    case Op::Scale:
      if (need_a) accumulate(adj, ia, c * g);
      break;
    case Op::Shift:
      if (need_a) accumulate(adj, ia, g);
      break;
    case Op::MatMul: {
      const bool ta = order & kTransA;
      const bool tb = order & kTransB;
      if (need_a) {
        if (!ta) accumulate(adj, ia, matmul(g, B, false, !tb));
        else accumulate(adj, ia, matmul(B, g, tb, true));
      }
      if (need_b) {
        if (!tb) accumulate(adj, ib, matmul(A, g, !ta, false));
        else accumulate(adj, ib, matmul(g, A, true, ta));
      }
      break;
    }
    case Op::Gather:
      if (need_a) accumulate(adj, ia, scatter_add(g, aux, A.rows(), A.cols()));
      break;
    case Op::ScatterAdd:
      if (need_a) accumulate(adj, ia, gather(g, aux, A.rows(), A.cols()));
      break;
    case Op::Tanh:
      if (need_a) accumulate(adj, ia, g - g * Y * Y);
      break;
    case Op::Exp:
      if (need_a) accumulate(adj, ia, g * Y);
      break;
    case Op::Log:
      if (need_a) accumulate(adj, ia, g * reciprocal(A));
      break;
    case Op::Reciprocal:
      if (need_a) accumulate(adj, ia, -(g * Y * Y));
      break;
    case Op::Sqrt:
      if (need_a) accumulate(adj, ia, 0.5 * (g * reciprocal(Y)));
      break;
    case Op::Elu:
      if (need_a) accumulate(adj, ia, g * elu(A, std::min(order + 1, 2)));
      break;
    case Op::FloorMax:
      if (need_a) {
        Tensor mask = map_values(A.value(), [c](double v) { return v > c ? 1.0 : 0.0; });
        accumulate(adj, ia, g * constant(std::move(mask)));
      }
      break;
    case Op::Softmax:
      if (need_a) {
        const Var gy = g * Y;
        accumulate(adj, ia, gy - Y * broadcast_cols(row_sum(gy), Y.cols()));
      }
      break;
    case Op::SoftmaxXent:
      if (need_a) {
        const std::size_t rows = A.rows();
        const std::size_t cols = A.cols();
        Tensor onehot(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) onehot(r, (*aux)[r]) = 1.0;
        const Var residual = softmax(A) - constant(std::move(onehot));
        accumulate(adj, ia, broadcast_cols(g, cols) * residual);
      }
      break;
  }
}

Var operator+(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a.value(), b.value(), "add");
  return binary(Op::Add, a, b, zip_values(a.value(), b.value(), std::plus<>{}));
}

Var operator-(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  return binary(Op::Sub, a, b, zip_values(a.value(), b.value(), std::minus<>{}));
}

Var operator*(Var a, Var b) {
  require_same_graph(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  return binary(Op::Mul, a, b,
                zip_values(a.value(), b.value(), std::multiplies<>{}));
}

Var operator*(double c, Var a) {
  return unary(Op::Scale, a, map_values(a.value(), [c](double v) { return c * v; }), c);
}
Var operator*(Var a, double c) { return c * a; }
Var operator-(Var a) { return -1.0 * a; }

Var operator+(Var a, double c) {
  return unary(Op::Shift, a, map_values(a.value(), [c](double v) { return v + c; }), c);
}
Var operator+(double c, Var a) { return a + c; }
Var operator-(Var a, double c) { return a + (-c); }

Var matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  require_same_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = transpose_a ? A.cols : A.rows;
  const std::size_t k = transpose_a ? A.rows : A.cols;
  const std::size_t kb = transpose_b ? B.cols : B.rows;
  const std::size_t n = transpose_b ? B.rows : B.cols;
  if (k != kb) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(k) + " and " +
                     std::to_string(kb) + " differ");
  }
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = &out.data[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double av = transpose_a ? A.data[p * A.cols + i] : A.data[i * A.cols + p];
      if (av == 0.0) continue;
      if (!transpose_b) {
        const double* brow = &B.data[p * B.cols];
        for (std::size_t j = 0; j < n; ++j) o[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) o[j] += av * B.data[j * B.cols + p];
      }
    }
  }
  const int flags = (transpose_a ? kTransA : 0) | (transpose_b ? kTransB : 0);
  return binary(Op::MatMul, a, b, std::move(out), flags);
}

Var gather(Var x, IndexMap idx, std::size_t rows, std::size_t cols) {
  if (!idx || idx->size() != rows * cols) {
    throw ShapeError("gather: index map size does not match output shape");
  }
  const Tensor& in = x.value();
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const auto src = (*idx)[i];
    if (src >= in.size()) throw ShapeError("gather: index out of range");
    out.data[i] = in.data[src];
  }
  return unary(Op::Gather, x, std::move(out), 0.0, 0, std::move(idx));
}

Var scatter_add(Var x, IndexMap idx, std::size_t rows, std::size_t cols) {
  const Tensor& in = x.value();
  if (!idx || idx->size() != in.size()) {
    throw ShapeError("scatter_add: index map size does not match input");
  }
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const auto dst = (*idx)[i];
    if (dst >= out.size()) throw ShapeError("scatter_add: index out of range");
    out.data[dst] += in.data[i];
  }
  return unary(Op::ScatterAdd, x, std::move(out), 0.0, 0, std::move(idx));
}

Var tanh(Var x) {
  return unary(Op::Tanh, x, map_values(x.value(), [](double v) { return std::tanh(v); }));
}

Var exp(Var x) {
  return unary(Op::Exp, x, map_values(x.value(), [](double v) { return std::exp(v); }));
}

Var log(Var x) {
  return unary(Op::Log, x, map_values(x.value(), [](double v) { return std::log(v); }));
}

Var reciprocal(Var x) {
  return unary(Op::Reciprocal, x,
               map_values(x.value(), [](double v) { return 1.0 / v; }));
}

Var sqrt(Var x) {
  return unary(Op::Sqrt, x, map_values(x.value(), [](double v) { return std::sqrt(v); }));
}

Var elu(Var x, int order) {
  order = std::clamp(order, 0, 2);
  Tensor out;
  switch (order) {
    case 0:
      out = map_values(x.value(), [](double v) { return v > 0.0 ? v : std::expm1(v); });
      break;
    case 1:
      out = map_values(x.value(), [](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
      break;
    default:
      out = map_values(x.value(), [](double v) { return v > 0.0 ? 0.0 : std::exp(v); });
      break;
  }
  return unary(Op::Elu, x, std::move(out), 0.0, order);
}

Var floor_max(Var x, double floor) {
  return unary(Op::FloorMax, x,
               map_values(x.value(), [floor](double v) { return std::max(v, floor); }),
               floor);
}

Var softmax(Var logits) {
  return unary(Op::Softmax, logits, softmax_rows(logits.value()));
}

Var softmax_xent(Var logits, IndexMap labels) {
  const Tensor& z = logits.value();
  if (!labels || labels->size() != z.rows) {
    throw ShapeError("softmax_xent: need one label per row");
  }
  Tensor out(z.rows, 1);
  for (std::size_t r = 0; r < z.rows; ++r) {
    const auto label = (*labels)[r];
    if (label >= z.cols) throw ShapeError("softmax_xent: label out of range");
    const double* in = &z.data[r * z.cols];
    const double mx = *std::max_element(in, in + z.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) total += std::exp(in[j] - mx);
    out.data[r] = mx + std::log(total) - in[label];
  }
  return unary(Op::SoftmaxXent, logits, std::move(out), 0.0, 0, std::move(labels));
}

Var sum(Var x) {
  return scatter_add(x, make_index(std::vector<std::uint32_t>(x.value().size(), 0)), 1, 1);
}

Var row_sum(Var x) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  std::vector<std::uint32_t> idx(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(idx.begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                static_cast<std::uint32_t>(r));
  }
  return scatter_add(x, make_index(std::move(idx)), rows, 1);
}

Var broadcast_cols(Var column, std::size_t cols) {
  if (column.cols() != 1) throw ShapeError("broadcast_cols: expected a column");
  const std::size_t rows = column.rows();
  std::vector<std::uint32_t> idx(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::fill_n(idx.begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
                static_cast<std::uint32_t>(r));
  }
  return gather(column, make_index(std::move(idx)), rows, cols);
}

Var broadcast_rows(Var row, std::size_t rows) {
  if (row.rows() != 1) throw ShapeError("broadcast_rows: expected a row");
  const std::size_t cols = row.cols();
  std::vector<std::uint32_t> idx(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      idx[r * cols + j] = static_cast<std::uint32_t>(j);
    }
  }
  return gather(row, make_index(std::move(idx)), rows, cols);
}

Var select_cols(Var x, std::span<const std::size_t> cols) {
  const std::size_t rows = x.rows();
  const std::size_t width = x.cols();
  std::vector<std::uint32_t> idx(rows * cols.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j] >= width) throw ShapeError("select_cols: column out of range");
      idx[r * cols.size() + j] = static_cast<std::uint32_t>(r * width + cols[j]);
    }
  }
  return gather(x, make_index(std::move(idx)), rows, cols.size());
}

Var place_cols(Var x, std::span<const std::size_t> cols, std::size_t total_cols) {
  if (x.cols() != cols.size()) throw ShapeError("place_cols: column count mismatch");
  const std::size_t rows = x.rows();
  std::vector<std::uint32_t> idx(rows * cols.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j] >= total_cols) throw ShapeError("place_cols: column out of range");
      idx[r * cols.size() + j] = static_cast<std::uint32_t>(r * total_cols + cols[j]);
    }
  }
  return scatter_add(x, make_index(std::move(idx)), rows, total_cols);
}

Var transpose(Var x) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  std::vector<std::uint32_t> idx(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) {
      idx[j * rows + r] = static_cast<std::uint32_t>(r * cols + j);
    }
  }
  return gather(x, make_index(std::move(idx)), cols, rows);
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  if (rows * cols != x.value().size()) throw ShapeError("reshape: size mismatch");
  std::vector<std::uint32_t> idx(rows * cols);
  std::iota(idx.begin(), idx.end(), 0u);
  return gather(x, make_index(std::move(idx)), rows, cols);
}

Var dot(Var a, Var b) { return sum(a * b); }

}  // namespace metalink::diff

#include "metalink/diff/param_vector.hpp"

#include <numeric>

#include "metalink/errors.hpp"

namespace metalink::diff {

std::size_t Layout::add(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& s : segments_) {
    if (s.name == name) throw ShapeError("duplicate segment name: " + name);
  }
  const std::size_t offset = total_;
  segments_.push_back(Segment{std::move(name), offset, rows, cols});
  total_ += rows * cols;
  return offset;
}

const Segment& Layout::at(const std::string& name) const {
  for (const auto& s : segments_) {
    if (s.name == name) return s;
  }
  throw ShapeError("no such segment: " + name);
}

ParamVector::ParamVector(Layout layout, std::vector<double> values)
    : ParamVector(std::make_shared<const Layout>(std::move(layout)), std::move(values)) {}

ParamVector::ParamVector(std::shared_ptr<const Layout> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_->total()) {
    throw ShapeError("parameter count " + std::to_string(values_.size()) +
                     " does not match layout size " + std::to_string(layout_->total()));
  }
}

ParamVector ParamVector::zeros(Layout layout) {
  const std::size_t n = layout.total();
  return ParamVector(std::move(layout), std::vector<double>(n, 0.0));
}

std::span<const double> ParamVector::segment(const std::string& name) const {
  const Segment& s = layout_->at(name);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

ParamVector ParamVector::with_values(std::vector<double> values) const {
  return ParamVector(layout_, std::move(values));
}

bool ParamVector::same_layout(const ParamVector& other) const {
  return layout_ == other.layout_ || *layout_ == *other.layout_;
}

bool ParamVector::operator==(const ParamVector& other) const {
  return same_layout(other) && values_ == other.values_;
}

Var bind(Graph& g, const ParamVector& p) {
  const auto v = p.values();
  return g.variable(Tensor(1, v.size(), std::vector<double>(v.begin(), v.end())));
}

Var bind_constant(Graph& g, const ParamVector& p) {
  const auto v = p.values();
  return g.constant(Tensor(1, v.size(), std::vector<double>(v.begin(), v.end())));
}

Var segment(Var flat, const Segment& seg) {
  std::vector<std::uint32_t> idx(seg.size());
  std::iota(idx.begin(), idx.end(), static_cast<std::uint32_t>(seg.offset));
  return gather(flat, make_index(std::move(idx)), seg.rows, seg.cols);
}

}  // namespace metalink::diff

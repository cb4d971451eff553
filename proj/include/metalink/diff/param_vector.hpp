#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "metalink/diff/graph.hpp"

namespace metalink::diff {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const noexcept { return rows * cols; }
  bool operator==(const Segment&) const = default;
};

// Ordered list of named matrix blocks packed contiguously.
class Layout {
 public:
  Layout() = default;

  // Appends a rows x cols block and returns its offset.
  std::size_t add(std::string name, std::size_t rows, std::size_t cols);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const Segment& at(const std::string& name) const;
  std::size_t total() const noexcept { return total_; }
  bool operator==(const Layout&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

// Flat, immutable parameter vector with a named segment map. Updates return
// new vectors; copies share the layout.
class ParamVector {
 public:
  ParamVector() : layout_(std::make_shared<const Layout>()) {}
  ParamVector(Layout layout, std::vector<double> values);
  ParamVector(std::shared_ptr<const Layout> layout, std::vector<double> values);

  static ParamVector zeros(Layout layout);

  const Layout& layout() const noexcept { return *layout_; }
  const std::shared_ptr<const Layout>& shared_layout() const noexcept { return layout_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> segment(const std::string& name) const;

  ParamVector with_values(std::vector<double> values) const;
  bool same_layout(const ParamVector& other) const;

  bool operator==(const ParamVector& other) const;

 private:
  std::shared_ptr<const Layout> layout_;
  std::vector<double> values_;
};

// Registers p as a 1 x size() differentiable input of g.
Var bind(Graph& g, const ParamVector& p);
// Registers p as a constant input of g.
Var bind_constant(Graph& g, const ParamVector& p);
// Reshaped view (rows x cols) of one segment of a bound parameter vector.
Var segment(Var flat, const Segment& seg);

}  // namespace metalink::diff

#pragma once

#include "rgflow/linalg.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rgflow {

/// Axis-aligned box [lo, hi].
struct Box {
  Vector lo;
  Vector hi;

  int dim() const { return static_cast<int>(lo.size()); }
  static Box cube(int dim, double half_width);
  static Box centered(const Vector& half_widths);
  bool contains(const Vector& x) const;
};

/// Tensor grid of nodes on a box, including the faces. Nodes are ordered
/// row-major: the last axis varies fastest.
class Grid {
 public:
  Grid() = default;
  Grid(Box box, std::vector<int> shape);

  const Box& box() const { return box_; }
  const std::vector<int>& shape() const { return shape_; }
  int dim() const { return box_.dim(); }
  Eigen::Index size() const { return size_; }

  double spacing(int axis) const;
  double coordinate(int axis, int i) const;
  Eigen::Index stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  Vector node(Eigen::Index idx) const;
  Matrix nodes() const;  // d x size
  std::vector<int> multi_index(Eigen::Index idx) const;
  Eigen::Index index(const std::vector<int>& multi) const;

  /// Same box, 2n - 1 nodes per axis: the old nodes plus every cell midpoint.
  Grid refined() const;
  /// Same box, (n + 1) / 2 nodes per axis; requires odd n.
  Grid coarsened() const;

  /// Tensor trapezoid weights (cell volume shared among the cell's corners).
  Vector trapezoid_weights() const;

  /// True when the node lies within `band` nodes of some face.
  bool near_boundary(Eigen::Index idx, int band) const;

 private:
  Box box_;
  std::vector<int> shape_;
  std::vector<Eigen::Index> strides_;
  Eigen::Index size_ = 0;
};

/// Values sampled at the nodes of a grid.
struct GridFunction {
  Grid grid;
  Vector values;
  std::string tag;

  /// Local tensor Lagrange interpolation of degree 5; points outside the box
  /// are clamped to it.
  double at(const Vector& x) const;
};

GridFunction sample_on_grid(const Grid& grid, const std::function<double(const Vector&)>& f,
                            std::string tag = {});

/// Finite-difference weights for the `order`-th derivative at x0 from the
/// stencil `xs` (Fornberg's recursion).
std::vector<double> fornberg_weights(double x0, const std::vector<double>& xs, int order);

/// First or second derivative of grid values along one axis, using a stencil
/// of `accuracy + 1` points centred in the interior and shifted inward near
/// the faces.
Vector axis_derivative(const Grid& grid, const Vector& values, int axis, int order,
                       int accuracy = 8);

/// Trapezoid expectation of `values` against normalized weights exp(log_w).
double weighted_mean(const Vector& log_w, const Vector& trap, const Vector& values);

}  // namespace rgflow

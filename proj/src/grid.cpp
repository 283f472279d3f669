#include "rgflow/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace rgflow {

Box Box::cube(int dim, double half_width) {
  if (dim < 1 || !(half_width > 0.0)) throw DomainError("box needs dim >= 1 and half-width > 0");
  return {Vector::Constant(dim, -half_width), Vector::Constant(dim, half_width)};
}

Box Box::centered(const Vector& half_widths) {
  if (half_widths.size() < 1 || (half_widths.array() <= 0.0).any()) {
    throw DomainError("box half-widths must be positive");
  }
  return {-half_widths, half_widths};
}

bool Box::contains(const Vector& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

Grid::Grid(Box box, std::vector<int> shape) : box_(std::move(box)), shape_(std::move(shape)) {
  const int d = box_.dim();
  if (d < 1 || box_.hi.size() != d || static_cast<int>(shape_.size()) != d) {
    throw DomainError("grid shape does not match box dimension");
  }
  for (int k = 0; k < d; ++k) {
    if (shape_[k] < 2) throw DomainError("grid needs at least 2 nodes per axis");
    if (!(box_.hi(k) > box_.lo(k))) throw DomainError("grid box must have positive extent");
  }
  strides_.assign(static_cast<std::size_t>(d), 1);
  for (int k = d - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * shape_[k + 1];
  size_ = strides_[0] * shape_[0];
}

double Grid::spacing(int axis) const {
  return (box_.hi(axis) - box_.lo(axis)) / (shape_[axis] - 1);
}

double Grid::coordinate(int axis, int i) const {
  if (i == shape_[axis] - 1) return box_.hi(axis);
  return box_.lo(axis) + i * spacing(axis);
}

std::vector<int> Grid::multi_index(Eigen::Index idx) const {
  std::vector<int> m(shape_.size());
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    m[k] = static_cast<int>(idx / strides_[k]);
    idx %= strides_[k];
  }
  return m;
}

Eigen::Index Grid::index(const std::vector<int>& multi) const {
  Eigen::Index idx = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) idx += multi[k] * strides_[k];
  return idx;
}

Vector Grid::node(Eigen::Index idx) const {
  const auto m = multi_index(idx);
  Vector x(dim());
  for (int k = 0; k < dim(); ++k) x(k) = coordinate(k, m[k]);
  return x;
}

Matrix Grid::nodes() const {
  Matrix out(dim(), size_);
  for (Eigen::Index i = 0; i < size_; ++i) out.col(i) = node(i);
  return out;
}

Grid Grid::refined() const {
  std::vector<int> s(shape_);
  for (auto& n : s) n = 2 * n - 1;
  return Grid(box_, s);
}

Grid Grid::coarsened() const {
  std::vector<int> s(shape_);
  for (auto& n : s) {
    if (n % 2 == 0 || n < 5) throw DomainError("coarsening needs an odd node count >= 5 per axis");
    n = (n + 1) / 2;
  }
  return Grid(box_, s);
}

Vector Grid::trapezoid_weights() const {
  Vector w(size_);
  for (Eigen::Index i = 0; i < size_; ++i) {
    const auto m = multi_index(i);
    double v = 1.0;
    for (int k = 0; k < dim(); ++k) {
      const bool face = m[k] == 0 || m[k] == shape_[k] - 1;
      v *= spacing(k) * (face ? 0.5 : 1.0);
    }
    w(i) = v;
  }
  return w;
}

bool Grid::near_boundary(Eigen::Index idx, int band) const {
  const auto m = multi_index(idx);
  for (int k = 0; k < dim(); ++k) {
    if (m[k] < band || m[k] > shape_[k] - 1 - band) return true;
  }
  return false;
}

namespace {

// Lagrange basis values of the `count`-point stencil starting at `first` on a
// uniform axis, evaluated at fractional node position u.
void lagrange_basis(int first, int count, double u, double* out) {
  for (int a = 0; a < count; ++a) {
    double v = 1.0;
    for (int b = 0; b < count; ++b) {
      if (b != a) v *= (u - (first + b)) / static_cast<double>(a - b);
    }
    out[a] = v;
  }
}

}  // namespace

double GridFunction::at(const Vector& x) const {
  const int d = grid.dim();
  if (x.size() != d) throw DomainError("interpolation point has the wrong dimension");
  constexpr int kPoints = 6;
  std::vector<int> first(static_cast<std::size_t>(d));
  std::vector<int> count(static_cast<std::size_t>(d));
  std::vector<std::array<double, kPoints>> basis(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const int n = grid.shape()[k];
    const double xc = std::clamp(x(k), grid.box().lo(k), grid.box().hi(k));
    const double u = (xc - grid.box().lo(k)) / grid.spacing(k);
    const int c = std::min(n, kPoints);
    int f = static_cast<int>(std::floor(u)) - (c / 2 - 1);
    f = std::clamp(f, 0, n - c);
    first[k] = f;
    count[k] = c;
    lagrange_basis(f, c, u, basis[k].data());
  }
  double total = 0.0;
  std::vector<int> off(static_cast<std::size_t>(d), 0);
  std::vector<int> multi(static_cast<std::size_t>(d));
  while (true) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      w *= basis[k][off[k]];
      multi[k] = first[k] + off[k];
    }
    total += w * values(grid.index(multi));
    int k = d - 1;
    while (k >= 0 && ++off[k] == count[k]) off[k--] = 0;
    if (k < 0) break;
  }
  return total;
}

GridFunction sample_on_grid(const Grid& grid, const std::function<double(const Vector&)>& f,
                            std::string tag) {
  GridFunction out{grid, Vector(grid.size()), std::move(tag)};
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    out.values(i) = f(grid.node(i));
    if (!std::isfinite(out.values(i))) throw DomainError("grid function has a non-finite value");
  }
  return out;
}

std::vector<double> fornberg_weights(double x0, const std::vector<double>& xs, int order) {
  const int n = static_cast<int>(xs.size()) - 1;
  if (order < 0 || order > n) throw DomainError("stencil too small for derivative order");
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n + 1),
                                     std::vector<double>(static_cast<std::size_t>(order + 1), 0.0));
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> out(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) out[i] = c[i][order];
  return out;
}

Vector axis_derivative(const Grid& grid, const Vector& values, int axis, int order, int accuracy) {
  const int n = grid.shape()[axis];
  const int points = std::min(accuracy + 1, n);
  const double h = grid.spacing(axis);
  // One stencil per position along the axis, reused across the other axes.
  std::vector<std::vector<double>> weights(static_cast<std::size_t>(n));
  std::vector<int> firsts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int first = std::clamp(i - points / 2, 0, n - points);
    firsts[i] = first;
    std::vector<double> xs(static_cast<std::size_t>(points));
    for (int a = 0; a < points; ++a) xs[a] = first + a;
    auto w = fornberg_weights(static_cast<double>(i), xs, order);
    for (auto& v : w) v /= std::pow(h, order);
    weights[i] = std::move(w);
  }
  Vector out(values.size());
  const auto stride = grid.stride(axis);
  for (Eigen::Index idx = 0; idx < grid.size(); ++idx) {
    const int i = static_cast<int>((idx / stride) % n);
    const Eigen::Index base = idx - static_cast<Eigen::Index>(i) * stride;
    double acc = 0.0;
    const auto& w = weights[i];
    for (int a = 0; a < points; ++a) acc += w[a] * values(base + (firsts[i] + a) * stride);
    out(idx) = acc;
  }
  return out;
}

double weighted_mean(const Vector& log_w, const Vector& trap, const Vector& values) {
  const double m = log_w.maxCoeff();
  const Vector w = (log_w.array() - m).exp() * trap.array();
  return w.dot(values) / w.sum();
}

}  // namespace rgflow

#include "rgflow/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace rgflow {
namespace {

// Orthonormal probabilists' Hermite polynomials p_0..p_n at x; returns p_n and
// p_{n-1}, and accumulates sum_{k<n} p_k^2 into `christoffel`.
void hermite_orthonormal(int n, double x, double& pn, double& pn1, double& christoffel) {
  double prev = 0.0;
  double cur = 1.0;
  christoffel = 0.0;
  for (int k = 0; k < n; ++k) {
    christoffel += cur * cur;
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                        std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
  }
  pn = cur;
  pn1 = prev;
}

void legendre(int n, double x, double& pn, double& dpn) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    pn = 1.0;
    dpn = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  pn = p1;
  dpn = n * (x * p1 - p0) / (x * x - 1.0);
}

Vector jacobi_eigenvalues(const Vector& offdiag, int n) {
  Matrix jac = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jac(k - 1, k) = offdiag(k - 1);
    jac(k, k - 1) = offdiag(k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jac, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace

void gauss_hermite_1d(int order, Vector& nodes, Vector& weights) {
  if (order < 1 || order > 200) throw DomainError("Gauss-Hermite order must be in [1, 200]");
  const int n = order;
  Vector off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  nodes = jacobi_eigenvalues(off, n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = nodes(i);
    double pn = 0.0;
    double pn1 = 0.0;
    double c = 0.0;
    for (int it = 0; it < 3; ++it) {
      hermite_orthonormal(n, x, pn, pn1, c);
      x -= pn / (std::sqrt(static_cast<double>(n)) * pn1);
    }
    hermite_orthonormal(n, x, pn, pn1, c);
    nodes(i) = x;
    weights(i) = 1.0 / c;
  }
  // Symmetrize to remove round-off asymmetry.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (nodes(n - 1 - i) - nodes(i));
    const double w = 0.5 * (weights(i) + weights(n - 1 - i));
    nodes(i) = -x;
    nodes(n - 1 - i) = x;
    weights(i) = weights(n - 1 - i) = w;
  }
  if (n % 2 == 1) nodes(n / 2) = 0.0;
}

void gauss_legendre_1d(int order, Vector& nodes, Vector& weights) {
  if (order < 1) throw DomainError("Gauss-Legendre order must be >= 1");
  const int n = order;
  Vector off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  nodes = jacobi_eigenvalues(off, n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = nodes(i);
    double pn = 0.0;
    double dpn = 0.0;
    for (int it = 0; it < 3; ++it) {
      legendre(n, x, pn, dpn);
      x -= pn / dpn;
    }
    legendre(n, x, pn, dpn);
    nodes(i) = x;
    weights(i) = 2.0 / ((1.0 - x * x) * dpn * dpn);
  }
  if (n == 1) {
    nodes(0) = 0.0;
    weights(0) = 2.0;
  }
}

QuadratureRule gauss_hermite_rule(int order, int dim) {
  if (dim < 0 || dim > 3) throw DomainError("tensor Gauss-Hermite rules support dim <= 3");
  // Rules are immutable; cache them since potentials request the same few.
  static std::mutex mu;
  static std::map<std::pair<int, int>, QuadratureRule> cache;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find({order, dim}); it != cache.end()) return it->second;
  }
  Vector x;
  Vector w;
  gauss_hermite_1d(order, x, w);
  QuadratureRule rule;
  rule.order = order;
  rule.dim = dim;
  Eigen::Index total = 1;
  for (int k = 0; k < dim; ++k) total *= order;
  rule.nodes.resize(dim, total);
  rule.log_weights.resize(total);
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    Eigen::Index rem = idx;
    double lw = 0.0;
    for (int k = dim - 1; k >= 0; --k) {
      const auto i = rem % order;
      rem /= order;
      rule.nodes(k, idx) = x(i);
      lw += std::log(w(i));
    }
    rule.log_weights(idx) = lw;
  }
  std::lock_guard lock(mu);
  cache.emplace(std::make_pair(order, dim), rule);
  return rule;
}

double log_sum_exp(const Vector& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double integrate_samples(const std::vector<double>& x, const std::vector<double>& f) {
  const auto n = x.size();
  if (f.size() != n) throw DomainError("integrate_samples: size mismatch");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x[i] > x[i - 1])) throw DomainError("integration grid must be strictly increasing");
  }
  double total = 0.0;
  std::size_t i = 0;
  for (; i + 2 < n; i += 2) {
    const double h0 = x[i + 1] - x[i];
    const double h1 = x[i + 2] - x[i + 1];
    const double s = h0 + h1;
    total += s / 6.0 *
             ((2.0 - h1 / h0) * f[i] + s * s / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
  }
  if (i + 1 < n) total += 0.5 * (x[i + 1] - x[i]) * (f[i] + f[i + 1]);
  return total;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& x,
                                         const std::vector<double>& f) {
  if (f.size() != x.size()) throw DomainError("cumulative_trapezoid: size mismatch");
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw DomainError("integration grid must be strictly increasing");
    out[i] = out[i - 1] + 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
  }
  return out;
}

}  // namespace rgflow

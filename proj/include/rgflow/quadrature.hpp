#pragma once

#include "rgflow/linalg.hpp"

#include <vector>

namespace rgflow {

/// Tensor-product Gauss–Hermite rule for expectations under the standard
/// Gaussian N(0, I_dim):  E[f(Z)] ~= sum_k exp(log_weights[k]) f(nodes.col(k)).
///
/// An order-n rule integrates polynomials of degree <= 2n-1 exactly in each
/// axis. Weights are stored in log form because the outer nodes of high-order
/// rules carry weights far below the double range once multiplied together.
struct QuadratureRule {
  int order = 0;
  int dim = 0;
  Matrix nodes;        // dim x size
  Vector log_weights;  // size

  Eigen::Index size() const { return log_weights.size(); }
};

/// Default points per axis for Gaussian expectations.
inline constexpr int kDefaultQuadratureOrder = 40;

QuadratureRule gauss_hermite_rule(int order, int dim);

/// One-dimensional Gauss–Hermite nodes/weights for the standard normal.
void gauss_hermite_1d(int order, Vector& nodes, Vector& weights);

/// Gauss–Legendre nodes/weights on [-1, 1].
void gauss_legendre_1d(int order, Vector& nodes, Vector& weights);

/// log(sum(exp(v))) with max-shift; returns -inf for an all -inf input.
double log_sum_exp(const Vector& v);

/// Integral of sampled values over an increasing, possibly non-uniform grid:
/// composite Simpson on consecutive interval pairs, trapezoid on a leftover
/// last interval.
double integrate_samples(const std::vector<double>& x, const std::vector<double>& f);

/// Running trapezoid integral, starting at 0 on x[0].
std::vector<double> cumulative_trapezoid(const std::vector<double>& x,
                                         const std::vector<double>& f);

}  // namespace rgflow

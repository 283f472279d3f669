#pragma once

// Reference computations for tests and the `oracle` subcommand. Everything
// here uses only the standard library and shares no code with the main
// numerics, so agreement between the two is evidence rather than tautology.

#include <array>
#include <functional>
#include <vector>

namespace rgflow::oracle {

/// Adaptive Simpson quadrature of f on [a, b] to absolute tolerance `tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 50);

/// Closed forms for V_0(x) = beta x^2 / 2 convolved with N(0, c).
struct GaussianPotential {
  double value;
  double gradient;
  double hessian;
};
GaussianPotential gaussian_renormalized(double beta, double c, double x);

/// V_t(x) = -log E[exp(-V_0(x + Z))], Z ~ N(0, c), in one dimension, by
/// adaptive Simpson over +-14 standard deviations. `v0_floor` must be a
/// lower bound of V_0, used to keep the integrand at O(1).
double renormalized_value_1d(const std::function<double(double)>& v0, double c, double x,
                             double v0_floor, double tol = 1e-14);

/// Moments of the 1D density proportional to exp(-u(y)) on [lo, hi].
struct Moments1d {
  double mass;  // integral of exp(-u)
  double mean;
  double variance;
  double second;  // E[y^2]
};
Moments1d moments_1d(const std::function<double(double)>& u, double lo, double hi,
                     double tol = 1e-14);

/// Covariance of the 2D density proportional to exp(-u(y)) on [lo, hi]^2 by
/// the tensor trapezoid rule with `points` nodes per axis.
std::array<double, 3> covariance_2d(const std::function<double(double, double)>& u, double lo,
                                    double hi, int points);  // {c11, c12, c22}

/// Eigenvalues of the reflecting weighted Sturm–Liouville problem
///   -(mobility w f')' = mu w f  on [lo, hi]
/// for the weight exp(log_w), by a cell-vertex finite-volume discretization
/// with `nodes` points and Sturm-sequence bisection on its symmetric
/// tridiagonal form. Returns mu_0..mu_count-1.
std::vector<double> sturm_liouville_eigenvalues(const std::function<double(double)>& log_w,
                                                double lo, double hi, double mobility, int nodes,
                                                int count);

/// One Richardson step (second order) between `nodes` and 2 nodes - 1.
std::vector<double> sturm_liouville_richardson(const std::function<double(double)>& log_w,
                                               double lo, double hi, double mobility, int nodes,
                                               int count);

/// Scalar heat-kernel schedule with C_inf = v.
struct ScalarSchedule {
  double c;
  double cprime;
  double csecond;
};
ScalarSchedule heat_kernel_scalar(double v, double t);
/// Scalar Pauli–Villars schedule C_t = (a + 1/t)^{-1}.
ScalarSchedule pauli_villars_scalar(double a, double t);

}  // namespace rgflow::oracle

#pragma once

#include "rgflow/covariance.hpp"
#include "rgflow/grid.hpp"
#include "rgflow/potential.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rgflow {

/// Unnormalized log-density of nu_t:  -1/2 <x, (C_inf - C_t)^{-1} x> - V_t(x).
double nu_log_density(const CovarianceSchedule& schedule, const PotentialDescriptor& v0, double t,
                      const Vector& x, int order = kDefaultQuadratureOrder);

/// Box of half-width `sigmas` standard deviations of the widest axis of the
/// Gaussian part gamma_{C_inf - C_t}.
Box default_flow_box(const CovarianceSchedule& schedule, double t, double sigmas = 8.0);

/// The flow measure nu_t restricted to a grid box. The log-density is
/// evaluated at every node on construction and normalized by trapezoid
/// quadrature over the box.
class FlowMeasure {
 public:
  FlowMeasure(const CovarianceSchedule& schedule, const PotentialDescriptor& v0, double t,
              Grid grid, int order = kDefaultQuadratureOrder);

  double t() const { return t_; }
  const Grid& grid() const { return grid_; }
  const CovarianceSample& covariance() const { return cov_; }
  const Matrix& remaining_inverse() const { return remaining_inv_; }
  /// V_t.
  const RenormalizedPotential& potential() const { return vt_; }

  double log_density(const Vector& x) const;
  double log_normalizer() const { return log_z_; }
  /// Normalized log-density at the nodes: sum(exp(.) * trapezoid) = 1.
  const Vector& log_density_nodes() const { return log_nodes_; }
  const Vector& trapezoid() const { return trap_; }
  /// Trapezoid expectation of node values under nu_t.
  double expectation(const Vector& node_values) const;
  /// Gaussian tail bound on the mass of gamma_{C_inf - C_t} outside the box.
  double outside_mass_bound() const;

 private:
  double t_;
  Grid grid_;
  CovarianceSample cov_;
  Matrix remaining_;
  Matrix remaining_inv_;
  RenormalizedPotential vt_;
  Vector log_nodes_;
  Vector trap_;
  double log_z_ = 0.0;
};

/// A test function with its gradient.
struct TestFunction {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

TestFunction constant_function(int dim, double c);
TestFunction linear_function(const Vector& a);
/// exp(1 - 1 / (1 - |x - c|^2 / r^2)) inside the ball, 0 outside.
TestFunction bump_function(const Vector& center, double radius);
/// exp(-|x - c|^2 / (2 w^2)).
TestFunction gaussian_bump(const Vector& center, double width);

/// P_{0t}F at one point together with its gradient and P_{0t}(|grad F|^2).
struct SemigroupSample {
  double value = 0.0;
  Vector gradient;
  double gradient_sq = 0.0;  // P_{0t}(|grad F|^2)
  double log_mass = 0.0;     // -V_t(x)
};

/// The Polchinski semigroup
///   P_{s,t} f = e^{V_t} gamma_{C_t - C_s} * (f e^{-V_s}),
/// evaluated as the expectation of f(x + Z) under the tilted measure
/// proportional to e^{-V_s(x + z)} gamma_{C_t - C_s}(dz). The normalization
/// of that measure is e^{-V_t(x)}, so P_{s,t} 1 = 1 holds by construction.
class PolchinskiSemigroup {
 public:
  PolchinskiSemigroup(CovarianceSchedule schedule, PotentialDescriptor v0,
                      int order = kDefaultQuadratureOrder);

  double apply(double s, double t, const std::function<double(const Vector&)>& f,
               const Vector& x) const;

  /// P_{s,t} f on the grid of f. Throws when the kernel is too wide for the
  /// box to represent f under the convolution.
  GridFunction apply(double s, double t, const GridFunction& f) const;

  /// grad P_{0t}F = E_rho[grad F] - Cov_rho(F, grad V_0).
  SemigroupSample from_zero(double t, const TestFunction& f, const Vector& x) const;

  const CovarianceSchedule& schedule() const { return schedule_; }
  const PotentialDescriptor& base_potential() const { return v0_; }
  int order() const { return order_; }

 private:
  CovarianceSchedule schedule_;
  PotentialDescriptor v0_;
  int order_;
};

GridFunction semigroup_apply(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                             double s, double t, const GridFunction& f,
                             int order = kDefaultQuadratureOrder);

/// Moments of P_{0t}F under nu_t, by trapezoid quadrature on a per-time box
/// of half-width `sigmas` standard deviations of gamma_{C_inf - C_t}.
struct FlowMoments {
  double mean = 0.0;      // E[P_{0t}F]
  double variance = 0.0;  // Var(P_{0t}F)
  double energy = 0.0;    // E |grad P_{0t}F|^2_{C_t'}
};

FlowMoments flow_moments(const PolchinskiSemigroup& semigroup, const TestFunction& f, double t,
                         int grid_points, double sigmas = 8.0);

struct ConservationOptions {
  int grid_points = 201;  // per axis, for each per-time box
  double box_sigmas = 8.0;
  int order = kDefaultQuadratureOrder;
  double tail_threshold = 1e-4;
  double mean_tolerance = 1e-6;
};

/// Variance decomposition along the flow up to the last grid time T:
///   Var_{nu_0} F = int_0^T E_{nu_t} |grad P_{0t} F|^2_{C_t'} dt + Var_{nu_T}(P_{0T} F).
/// The last term is the tail.
struct ConservationReport {
  double variance = 0.0;
  double integral = 0.0;
  double tail = 0.0;
  double mismatch = 0.0;  // |variance - integral - tail|, relative when variance > 0
  double max_mean_drift = 0.0;
  bool tail_too_large = false;
  bool mean_conserved = true;
  std::vector<double> t;
  std::vector<double> integrand;
  std::vector<double> mean;
  std::vector<double> variance_along;
};

/// `t_grid` must start at 0 and increase.
ConservationReport conservation_check(const CovarianceSchedule& schedule,
                                      const PotentialDescriptor& v0, const TestFunction& f,
                                      const std::vector<double>& t_grid,
                                      const ConservationOptions& options = {});

}  // namespace rgflow

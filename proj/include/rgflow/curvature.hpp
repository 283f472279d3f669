#pragma once

#include "rgflow/covariance.hpp"
#include "rgflow/flow.hpp"
#include "rgflow/potential.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace rgflow {

/// Largest lambda with  C' H C' - 1/2 C'' >= lambda C'  on range(C'): the
/// smallest generalized eigenvalue of the pencil restricted to that range.
double pointwise_curvature(const CovarianceSample& cov, const Matrix& hess);

/// Largest eigenvalue of (C')^{1/2} (H + G) (C')^{1/2}, G = (C_inf - C_t)^{-1}.
double pointwise_alpha(const CovarianceSample& cov, const Matrix& remaining_inverse,
                       const Matrix& hess);

struct CurvatureOptions {
  int order = kDefaultQuadratureOrder;
  int per_axis = 17;
  int random_points = 100;
  int refine_steps = 20;       // pattern-search steps from the extremal sample
  double outside_mass = 1e-6;  // sample box keeps 1 - outside_mass of gamma_{C_inf - C_t}
  std::uint64_t seed = 0x5eed;
  int subdivisions = 4;        // integration nodes per user interval (even)
  double refinement_tolerance = 1e-4;
};

/// Box on which "for all x" statements at time t are sampled.
Box curvature_sample_box(const CovarianceSchedule& schedule, double t, double outside_mass = 1e-6);

struct ExtremalValue {
  double value = 0.0;
  Vector argument;
  int samples_used = 0;
};

/// min over the sample set (then refined by local search) of the pointwise
/// curvature: the largest lambda'_t admissible on the samples.
ExtremalValue multiscale_margin(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                                double t, const std::vector<Vector>& samples,
                                const CurvatureOptions& options = {});

/// max over the sample set (then refined) of the pointwise alpha'_t. A lower
/// bound on the supremum over R^d.
ExtremalValue alpha_prime(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                          double t, const std::vector<Vector>& samples,
                          const CurvatureOptions& options = {});

/// Sampled lambda'_t, alpha'_t and their running integrals.
struct CurvatureSchedule {
  std::vector<double> t;
  std::vector<double> lambda_prime;
  std::vector<double> alpha_prime;
  std::vector<double> lambda_int;
  std::vector<double> alpha_int;
  std::vector<int> samples_used;
  std::string sample_spec;
  double refinement_change = 0.0;  // max |lambda_t| change against the half-resolution grid
  bool refinement_ok = true;

  /// Position of t in the grid; throws DomainError when absent.
  std::size_t index_of(double time) const;
  double lambda_at(double time) const { return lambda_int[index_of(time)]; }
  double alpha_at(double time) const { return alpha_int[index_of(time)]; }
};

/// Cumulative trapezoid integrals of given prime samples; t must start at 0
/// and increase.
CurvatureSchedule integrate_schedules(const std::vector<double>& t,
                                      const std::vector<double>& lambda_prime,
                                      const std::vector<double>& alpha_prime);

/// Evaluates lambda'_t and alpha'_t on {0} + t_grid with every interval split
/// into options.subdivisions pieces, integrates, and compares the integrals
/// with those of every second node.
CurvatureSchedule curvature_schedule(const CovarianceSchedule& schedule,
                                     const PotentialDescriptor& v0,
                                     const std::vector<double>& t_grid,
                                     const CurvatureOptions& options = {});

struct PairMargin {
  double s = 0.0;
  double t = 0.0;
  int k = 1;
  double exponent = 0.0;  // (alpha_t - alpha_s) - 2 (lambda_t - lambda_s)
  double margin = 0.0;
};

/// All (i, j) index pairs with i < j.
std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs(std::size_t n);

/// exponent + log C_P(t) - log C_P(s) for every ordered pair of trace points.
std::vector<PairMargin> theorem_margin(const std::vector<double>& times,
                                       const std::vector<double>& poincare,
                                       const CurvatureSchedule& curv);

/// exponent + log mu_k(s) - log mu_k(t) for k = 1..K; eigenvalues[i] holds
/// mu_0..mu_K at times[i].
std::vector<PairMargin> higher_eigenvalue_margin(const std::vector<double>& times,
                                                 const std::vector<Vector>& eigenvalues,
                                                 const CurvatureSchedule& curv);

struct PoincareBound {
  double s = 0.0;
  double speed = 0.0;      // |C_s'|
  double integral = 0.0;   // int_s^T exp(-2 (lambda_t - lambda_s)) dt
  double tail = 0.0;       // estimate of the remaining integral beyond T
  std::string tail_model;  // "exponential" or "power"
  double unweighted = 0.0; // speed * (integral + tail): bounds C_P with |grad f|^2
  double weighted = 0.0;   // integral + tail: bounds C_P with |grad f|^2_{C_s'}
};

/// Upper bounds on the Poincaré constants of nu_s from the curvature
/// schedule. Beyond the last time T the rate is extrapolated from the upper
/// half of the grid: a flat or growing lambda' uses its floor, a decaying one
/// the power law kappa / t with kappa = min t lambda'_t. Throws DomainError
/// ("bound divergent") when neither extrapolation is integrable.
PoincareBound poincare_upper_bound(const CurvatureSchedule& curv, double speed, double s);

struct IntertwiningReport {
  double t = 0.0;
  double max_violation = 0.0;  // max of lhs - rhs over the nodes
  double max_lhs = 0.0;
  Vector worst_point;
  int points = 0;
};

/// |grad P_{0t}F|^2_{C_t'} - |C_0'| exp(-2 lambda_t) P_{0t}(|grad F|^2) over a
/// grid of `points_per_axis` nodes on the curvature sample box at t.
IntertwiningReport intertwining_check(const PolchinskiSemigroup& semigroup, const TestFunction& f,
                                      double t, const CurvatureSchedule& curv,
                                      int points_per_axis = 101);

struct LemmaReport {
  double max_pair_excess = 0.0;   // max over s < t of log R(t) - log R(s) - exponent
  double max_rate_excess = 0.0;   // max over consecutive times of that excess / (t - s)
};

/// Checks R(t) <= R(s) exp((alpha_t - alpha_s) - 2 (lambda_t - lambda_s)) on a
/// Rayleigh trace whose times lie on the curvature grid.
LemmaReport lemma_check(const std::vector<double>& times, const std::vector<double>& quotients,
                        const CurvatureSchedule& curv);

}  // namespace rgflow

#pragma once

#include "rgflow/covariance.hpp"
#include "rgflow/curvature.hpp"
#include "rgflow/potential.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rgflow {

/// Lattice phi^4 measure on n sites:
///   exp(-1/2 (phi, A phi) - sum_x (g phi_x^4 / 4 + nu phi_x^2 / 2) + (h, phi)).
struct Phi4Model {
  Matrix a;
  double g = 1.0;
  double nu = 0.0;
  Vector h;

  int sites() const { return static_cast<int>(a.rows()); }
  /// Throws DomainError unless A is SPD, g >= 0, and for g = 0 also A + nu > 0.
  void validate() const;
  /// Pauli–Villars decomposition of C_inf = A^{-1}.
  CovarianceSchedule schedule() const;
  /// V_0 = sum_x (g phi_x^4 / 4 + nu phi_x^2 / 2) - (h, phi).
  PotentialDescriptor potential() const;
};

/// Chain Laplacian plus identity: 2 on the diagonal, -1 between neighbours
/// (free ends). A single site gets A = 2.
Matrix nearest_neighbor_matrix(int n);

enum class MomentMethod { Quadrature, Mcmc };
std::string to_string(MomentMethod method);

struct Phi4Options {
  int nodes_per_axis = 0;  // 0: 400 / 200 / 100 for n = 1 / 2 / 3
  int panel_order = 8;     // Gauss–Legendre points per panel
  bool check_convergence = true;
  bool force_mcmc = false;
  std::uint64_t seed = 0x5eed;
  long burn_in = 100000;   // single-site updates
  long sweeps = 200000;    // recorded sweeps after burn-in
  double target_acceptance = 0.4;
  double min_ess = 1000.0;
};

/// Mean and covariance of the measure with quadratic form A + (nu + mass) I,
/// quartic g and external field b (h replaced by b).
struct MomentEstimate {
  Vector mean;
  Matrix covariance;
  Matrix std_error;      // zero for quadrature
  MomentMethod method = MomentMethod::Quadrature;
  std::uint64_t seed = 0;
  long n_samples = 0;
  bool converged = true; // quadrature: halving the node count changes covariance by <= 1e-8
  double min_ess = 0.0;  // mcmc only
};

MomentEstimate phi4_moments(const Phi4Model& model, double mass, const Vector& field,
                            const Phi4Options& options = {});

struct SusceptibilityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int site = 0;  // the maximizing row
  MomentMethod method = MomentMethod::Quadrature;
  std::uint64_t seed = 0;
  long n_samples = 0;
  bool converged = true;
};

/// chi_t: largest row sum of the covariance of the zero-field measure with
/// mass nu + 1/t.
SusceptibilityEstimate susceptibility(const Phi4Model& model, double t,
                                      const Phi4Options& options = {});

/// Sigma_t(phi): covariance of the measure with mass nu + 1/t and field
/// C_t^{-1} phi + h.
MomentEstimate tilted_covariance(const Phi4Model& model, double t, const Vector& phi,
                                 const Phi4Options& options = {});

/// 1/t - chi / t^2.
double phi4_lambda_prime(double t, double chi);
/// 1/t - sigma_min / t^2 + lambda_max(A) (t lambda_max(A) + 1).
double phi4_alpha_formula(const Matrix& a, double t, double sigma_min);

struct Phi4SchedulePoint {
  double t = 0.0;
  double chi = 0.0;
  double chi_stderr = 0.0;
  double lambda_prime = 0.0;
  double sigma_min = 0.0;  // smallest lambda_min(Sigma_t) found; an upper bound on the inf
  Vector sigma_argmin;
  double alpha_formula = 0.0;
  int samples_used = 0;
};

/// inf over phi of lambda_min(Sigma_t(phi)), over `samples` followed by
/// coordinate-descent refinement.
ExtremalValue sigma_min_search(const Phi4Model& model, double t, const std::vector<Vector>& samples,
                               const Phi4Options& options = {}, int refine_steps = 20);

/// Both schedules at each t > 0. The phi samples come from the curvature
/// sample box of the Pauli–Villars flow at t.
std::vector<Phi4SchedulePoint> phi4_schedules(const Phi4Model& model,
                                              const std::vector<double>& t_grid,
                                              const Phi4Options& options = {},
                                              const CurvatureOptions& sampling = {});

struct HessianIdentityReport {
  double max_relative_error = 0.0;
  Vector worst_phi;
  double t = 0.0;
};

/// Compares C_t^{-1} - C_t^{-1} Sigma_t(phi) C_t^{-1} with fourth-order
/// finite differences of V_t at each phi; the error is
/// |difference|_F / max(|Hessian|_F, 1).
HessianIdentityReport hessian_identity_check(const Phi4Model& model, double t,
                                             const std::vector<Vector>& phis,
                                             const Phi4Options& options = {},
                                             double step = 0.02);

}  // namespace rgflow

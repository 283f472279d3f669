#pragma once

#include "rgflow/eigensolver.hpp"
#include "rgflow/flow.hpp"
#include "rgflow/grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rgflow {

/// Generator variants on the same flow data, all written as
///   kappa Delta_M - <grad U, M grad .>,  M = mobility (C_t' by default):
///   script-L  kappa = 1,   U = V_t + 1/2 <x, (C_inf - C_t)^{-1} x>   (reversible for nu_t)
///   Lambda    kappa = 1,   U = V_t
///   L         kappa = 1/2, U = V_t
/// Each is reversible for the weight exp(-U / kappa).
enum class Drift { ScriptL, L, Lambda };

std::string to_string(Drift drift);
Drift parse_drift(const std::string& name);
double drift_kappa(Drift drift);

/// One resolution of the divergence-form discretization.
struct GeneratorLevel {
  Grid grid;
  Vector log_mass;         // lumped weighted mass, normalized to total 1
  SparseMatrix stiffness;  // K with f^T K f = E_w |grad f|^2_{kappa M}
  SparseMatrix symmetric;  // M^{-1/2} K M^{-1/2}
  SparseMatrix generator;  // -M^{-1} K
};

/// Q1 finite elements with the weight frozen at cell centres and a lumped
/// (trapezoid) mass matrix: the discrete generator is exactly symmetric in
/// the weighted inner product, annihilates constants, and is reflecting at
/// the faces of the box. The coarse level (half the nodes per axis) reuses
/// the same weight evaluations and supports one Richardson step.
struct GeneratorDiscretization {
  double t = 0.0;
  Drift drift = Drift::ScriptL;
  Matrix mobility;
  GeneratorLevel fine;
  std::optional<GeneratorLevel> coarse;

  /// Generator applied to node values on the fine grid.
  Vector apply(const Vector& f) const;
  /// Weighted inner product on the fine grid.
  double inner(const Vector& f, const Vector& g) const;
};

/// `log_weight_refined` holds log w at the nodes of grid.refined(); the
/// effective diffusion matrix is kappa * mobility. Throws DomainError when the
/// weight underflows (below exp(-708) of its maximum) at more than 20% of the
/// nodes.
GeneratorDiscretization assemble_generator(const Grid& grid, const Vector& log_weight_refined,
                                           const Matrix& mobility, double kappa, double t,
                                           Drift drift, bool with_coarse);

/// Generator of the given drift for the flow data at flow.t() on flow.grid().
/// Pass the identity as `mobility` for the unweighted (Euclidean) metric.
GeneratorDiscretization build_generator(const FlowMeasure& flow, const Matrix& mobility,
                                        Drift drift, bool with_coarse = true);

struct SpectralResult {
  double t = 0.0;
  Vector eigenvalues;         // mu_0..mu_k after one Richardson step (fine only if no coarse level)
  Vector fine_eigenvalues;    // production grid
  Vector coarse_eigenvalues;  // half-resolution grid
  std::vector<GridFunction> eigenvectors;  // fine grid, weighted-orthonormal
  Vector residuals;
  std::vector<std::vector<int>> clusters;
  double poincare_constant = 0.0;  // 1 / mu_1
  double richardson_change = 0.0;  // max over k >= 1 of |mu_h - mu_2h| / mu_h
  bool converged = true;           // richardson_change <= 0.5%
};

SpectralResult spectrum(const GeneratorDiscretization& gen, int k);

/// Discrete Rayleigh quotient of phi (recentred) on the fine level.
double rayleigh_quotient(const GeneratorDiscretization& gen, const GridFunction& phi);

/// Generator applied by high-order finite differences in non-divergence
/// form, with the analytic gradient of U.
GridFunction generator_fd(const FlowMeasure& flow, const Matrix& mobility, Drift drift,
                          const GridFunction& phi, int accuracy = 8);

struct GammaReport {
  GridFunction gamma;               // |grad phi|^2_M
  GridFunction gamma2_composition;  // 1/2 (A Gamma(phi) - 2 Gamma(phi, A phi))
  GridFunction gamma2_explicit;     // kappa tr(M H M H) + <Hess U M grad phi, M grad phi>
  GridFunction generator_phi;       // A phi
  double relative_error = 0.0;      // interior sup |comp - expl| / sup |expl|
  double mean_gamma2 = 0.0;         // E_w[Gamma_2]
  double mean_square = 0.0;         // E_w[(A phi)^2] / kappa
};

/// Gamma and Gamma_2 of phi for the drift variant, computed by operator
/// composition and by the explicit Bochner form. Derivatives use stencils of
/// `accuracy + 1` points; the comparison skips `accuracy` nodes next to each
/// face. Throws DomainError when more than 1e-8 of the
/// weighted mass of phi^2 sits in that band.
GammaReport gamma_operators(const FlowMeasure& flow, const Matrix& mobility, Drift drift,
                            const GridFunction& phi, int accuracy = 8);

struct RayleighPoint {
  double t = 0.0;
  double quotient = 0.0;
  double energy = 0.0;
  double variance = 0.0;
};

/// R(t) = E_{nu_t}|grad phi_t|^2_{C_t'} / Var_{nu_t}(phi_t) with phi_t = P_{0t} phi_0,
/// using the analytic semigroup gradient on per-time grids.
std::vector<RayleighPoint> rayleigh_flow_trace(const PolchinskiSemigroup& semigroup,
                                               const TestFunction& phi0,
                                               const std::vector<double>& t_grid,
                                               int grid_points = 201);

}  // namespace rgflow

#pragma once

#include "rgflow/linalg.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rgflow {

/// A probability density sampled on a uniform 1D grid; between nodes it is
/// linear and outside [x.front(), x.back()] it vanishes.
struct DensityTable {
  std::vector<double> x;
  std::vector<double> density;
};

/// Two columns (x, density), whitespace or comma separated, `#` comments.
/// x must increase strictly with uniform spacing.
DensityTable read_density_table(std::istream& in);
DensityTable load_density_table(const std::string& path);

/// Tabulates a callable density on n uniform nodes of [lo, hi].
DensityTable tabulate_density(double lo, double hi, int n, double (*density)(double));

/// log of (mu * gamma_s)(y) for the piecewise-linear density of the table;
/// s = 0 returns the table itself.
double log_convolved_density(const DensityTable& table, double s, double y);

struct HeatflowOptions {
  int grid_points = 1025;    // odd; one Richardson step uses the half grid
  double tail_sigmas = 8.0;  // box = support widened by this many sqrt(s)
  double monotone_tolerance = 1e-4;
};

struct HeatflowTrace {
  std::vector<double> s;
  std::vector<double> poincare;  // C_P(mu * gamma_s) for the unweighted carré du champ
  std::vector<bool> converged;
  bool log_concave = false;
  bool monotone = true;          // nondecreasing within tolerance
  double max_decrease = 0.0;
  double input_mass = 1.0;       // trapezoid mass of the raw table
  bool renormalized = false;     // table rescaled to unit mass
  // C_P(mu * gamma_1) - 1 <= C_P(mu)
  double cp_mu = 0.0;
  double cp_mu_gamma1 = 0.0;
  bool deconvolution_bound = true;
};

/// Poincaré constants of mu_0 * gamma_s along s_grid.
HeatflowTrace heatflow_harness(const DensityTable& mu0, const std::vector<double>& s_grid,
                               const HeatflowOptions& options = {});

/// Discrete midpoint concavity of log mu on the table's nodes, with the
/// positive part required to be one contiguous run.
bool is_log_concave(const DensityTable& table, double tol = 1e-12);

}  // namespace rgflow

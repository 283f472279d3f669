#include "rgflow/spectral.hpp"

#include "rgflow/parallel.hpp"
#include "rgflow/quadrature.hpp"

#include <cmath>
#include <sstream>

namespace rgflow {
namespace {

constexpr double kUnderflowLog = -708.0;
constexpr double kUnderflowFraction = 0.2;
constexpr double kRichardsonTolerance = 5e-3;

// Exact integrals of grad(phi_a) . D grad(phi_b) over one Q1 cell, for the
// 2^d corners a, b (bit k of a selects the upper end along axis k).
Matrix local_stiffness(const Grid& grid, const Matrix& diffusion) {
  const int d = grid.dim();
  const int corners = 1 << d;
  Matrix out = Matrix::Zero(corners, corners);
  for (int a = 0; a < corners; ++a) {
    for (int b = 0; b < corners; ++b) {
      double total = 0.0;
      for (int k = 0; k < d; ++k) {
        for (int l = 0; l < d; ++l) {
          if (diffusion(k, l) == 0.0) continue;
          double prod = 1.0;
          for (int m = 0; m < d; ++m) {
            const double h = grid.spacing(m);
            const int am = (a >> m) & 1;
            const int bm = (b >> m) & 1;
            const double sa = am ? 1.0 : -1.0;
            const double sb = bm ? 1.0 : -1.0;
            if (m == k && m == l) {
              prod *= sa * sb / h;
            } else if (m == k) {
              prod *= 0.5 * sa;
            } else if (m == l) {
              prod *= 0.5 * sb;
            } else {
              prod *= h * (am == bm ? 2.0 : 1.0) / 6.0;
            }
          }
          total += diffusion(k, l) * prod;
        }
      }
      out(a, b) = total;
    }
  }
  return out;
}

GeneratorLevel assemble_level(const Grid& grid, const Grid& refined, const Vector& log_w,
                              int factor, const Matrix& diffusion) {
  const int d = grid.dim();
  const auto n = grid.size();
  auto refined_index = [&](const std::vector<int>& m, int offset) {
    std::vector<int> r(m.size());
    for (std::size_t k = 0; k < m.size(); ++k) r[k] = 2 * factor * m[k] + offset;
    return refined.index(r);
  };

  GeneratorLevel level;
  level.grid = grid;
  const Vector trap = grid.trapezoid_weights();
  Vector log_node(n);
  for (Eigen::Index i = 0; i < n; ++i) log_node(i) = log_w(refined_index(grid.multi_index(i), 0));
  const double log_z = log_sum_exp(log_node + trap.array().log().matrix());
  level.log_mass = log_node + trap.array().log().matrix();
  level.log_mass.array() -= log_z;

  const Matrix kloc = local_stiffness(grid, diffusion);
  const int corners = 1 << d;
  std::vector<int> cell_shape(grid.shape());
  for (auto& c : cell_shape) c -= 1;
  Eigen::Index cells = 1;
  for (int c : cell_shape) cells *= c;

  std::vector<Eigen::Triplet<double>> tk;
  std::vector<Eigen::Triplet<double>> ts;
  std::vector<Eigen::Triplet<double>> tg;
  tk.reserve(static_cast<std::size_t>(cells * corners * corners));
  ts.reserve(tk.capacity());
  tg.reserve(tk.capacity());
  std::vector<int> cm(static_cast<std::size_t>(d), 0);
  std::vector<Eigen::Index> corner_idx(static_cast<std::size_t>(corners));
  for (Eigen::Index c = 0; c < cells; ++c) {
    Eigen::Index rem = c;
    for (int k = d - 1; k >= 0; --k) {
      cm[k] = static_cast<int>(rem % cell_shape[k]);
      rem /= cell_shape[k];
    }
    const double log_wc = log_w(refined_index(cm, factor)) - log_z;
    for (int a = 0; a < corners; ++a) {
      std::vector<int> m(cm);
      for (int k = 0; k < d; ++k) m[k] += (a >> k) & 1;
      corner_idx[a] = grid.index(m);
    }
    for (int a = 0; a < corners; ++a) {
      const auto i = corner_idx[a];
      for (int b = 0; b < corners; ++b) {
        const double kab = kloc(a, b);
        if (kab == 0.0) continue;
        const auto j = corner_idx[b];
        tk.emplace_back(i, j, std::exp(log_wc) * kab);
        ts.emplace_back(i, j,
                        std::exp(log_wc - 0.5 * (level.log_mass(i) + level.log_mass(j))) * kab);
        tg.emplace_back(i, j, -std::exp(log_wc - level.log_mass(i)) * kab);
      }
    }
  }
  level.stiffness.resize(n, n);
  level.stiffness.setFromTriplets(tk.begin(), tk.end());
  level.symmetric.resize(n, n);
  level.symmetric.setFromTriplets(ts.begin(), ts.end());
  level.generator.resize(n, n);
  level.generator.setFromTriplets(tg.begin(), tg.end());
  // Exact symmetry: average with the transpose to remove summation-order noise.
  level.symmetric = 0.5 * (SparseMatrix(level.symmetric.transpose()) + level.symmetric);
  level.stiffness = 0.5 * (SparseMatrix(level.stiffness.transpose()) + level.stiffness);
  return level;
}

}  // namespace

std::string to_string(Drift drift) {
  switch (drift) {
    case Drift::ScriptL:
      return "script-L";
    case Drift::L:
      return "L";
    case Drift::Lambda:
      return "Lambda";
  }
  return "unknown";
}

Drift parse_drift(const std::string& name) {
  if (name == "script-L") return Drift::ScriptL;
  if (name == "L") return Drift::L;
  if (name == "Lambda") return Drift::Lambda;
  throw DomainError("unknown drift '" + name + "' (expected script-L, L or Lambda)");
}

double drift_kappa(Drift drift) { return drift == Drift::L ? 0.5 : 1.0; }

Vector GeneratorDiscretization::apply(const Vector& f) const { return fine.generator * f; }

double GeneratorDiscretization::inner(const Vector& f, const Vector& g) const {
  return (fine.log_mass.array().exp() * f.array() * g.array()).sum();
}

GeneratorDiscretization assemble_generator(const Grid& grid, const Vector& log_weight_refined,
                                           const Matrix& mobility, double kappa, double t,
                                           Drift drift, bool with_coarse) {
  const Grid refined = grid.refined();
  if (log_weight_refined.size() != refined.size()) {
    throw DomainError("log-weights must be given on the refined grid");
  }
  if (mobility.rows() != grid.dim() || !is_symmetric(mobility, 1e-10) ||
      min_eigenvalue(mobility) < -1e-12 * std::max(1.0, spectral_radius(mobility))) {
    throw DomainError("mobility must be a symmetric positive-semidefinite d x d matrix");
  }
  if (!log_weight_refined.allFinite()) throw DomainError("log-weights must be finite");
  const Vector log_w = log_weight_refined.array() - log_weight_refined.maxCoeff();
  const double under = (log_w.array() < kUnderflowLog).cast<double>().mean();
  if (under > kUnderflowFraction) {
    std::ostringstream os;
    os << "box too large / resolution too coarse: the weight underflows at " << 100.0 * under
       << "% of the nodes";
    throw DomainError(os.str());
  }
  GeneratorDiscretization gen;
  gen.t = t;
  gen.drift = drift;
  gen.mobility = mobility;
  const Matrix diffusion = kappa * symmetrize(mobility);
  gen.fine = assemble_level(grid, refined, log_w, 1, diffusion);
  if (with_coarse) gen.coarse = assemble_level(grid.coarsened(), refined, log_w, 2, diffusion);
  return gen;
}

namespace {

// -U / kappa for the drift variant, i.e. the log of its reversible weight.
double drift_log_weight(const FlowMeasure& flow, Drift drift, const Vector& x) {
  switch (drift) {
    case Drift::ScriptL:
      return flow.log_density(x);
    case Drift::Lambda:
      return -flow.potential().value(x);
    case Drift::L:
      return -2.0 * flow.potential().value(x);
  }
  return 0.0;
}

}  // namespace

GeneratorDiscretization build_generator(const FlowMeasure& flow, const Matrix& mobility,
                                        Drift drift, bool with_coarse) {
  const Grid refined = flow.grid().refined();
  Vector log_w(refined.size());
  parallel_for(static_cast<std::size_t>(refined.size()), [&](std::size_t i) {
    const auto idx = static_cast<Eigen::Index>(i);
    log_w(idx) = drift_log_weight(flow, drift, refined.node(idx));
  });
  return assemble_generator(flow.grid(), log_w, mobility, drift_kappa(drift), flow.t(), drift,
                            with_coarse);
}

SpectralResult spectrum(const GeneratorDiscretization& gen, int k) {
  if (k < 1) throw DomainError("spectrum needs k >= 1");
  const auto n = gen.fine.grid.size();
  if (k + 1 >= n) throw DomainError("spectrum: k + 1 must be below the number of grid nodes");
  SpectralResult out;
  out.t = gen.t;
  const auto fine = lowest_eigenpairs(gen.fine.symmetric, k + 1);
  out.fine_eigenvalues = fine.values;
  out.residuals = fine.residuals;
  out.eigenvalues = fine.values;
  if (gen.coarse) {
    if (k + 1 >= gen.coarse->grid.size()) throw DomainError("spectrum: coarse grid too small");
    const auto coarse = lowest_eigenpairs(gen.coarse->symmetric, k + 1);
    out.coarse_eigenvalues = coarse.values;
    out.eigenvalues = (4.0 * fine.values - coarse.values) / 3.0;
    for (int i = 1; i <= k; ++i) {
      const double change = std::abs(fine.values(i) - coarse.values(i)) / std::abs(fine.values(i));
      out.richardson_change = std::max(out.richardson_change, change);
    }
    out.converged = out.richardson_change <= kRichardsonTolerance;
  }
  out.clusters = eigenvalue_clusters(out.fine_eigenvalues);
  const Vector inv_sqrt_mass = (-0.5 * gen.fine.log_mass.array()).exp();
  for (int i = 0; i <= k; ++i) {
    GridFunction f{gen.fine.grid, inv_sqrt_mass.cwiseProduct(fine.vectors.col(i)),
                   "eigenvector-" + std::to_string(i)};
    out.eigenvectors.push_back(std::move(f));
  }
  if (!(out.eigenvalues(1) > 0.0)) {
    throw ConvergenceError("spectrum: first nontrivial eigenvalue is not positive");
  }
  out.poincare_constant = 1.0 / out.eigenvalues(1);
  return out;
}

double rayleigh_quotient(const GeneratorDiscretization& gen, const GridFunction& phi) {
  if (phi.values.size() != gen.fine.grid.size()) {
    throw DomainError("rayleigh quotient: function does not live on the generator grid");
  }
  const Vector mass = gen.fine.log_mass.array().exp();
  const double mean = mass.dot(phi.values);
  const Vector u = (0.5 * gen.fine.log_mass.array()).exp() * (phi.values.array() - mean);
  const double denom = u.squaredNorm();
  if (!(denom > 1e-14)) throw DomainError("degenerate test function");
  return u.dot(gen.fine.symmetric * u) / denom;
}

namespace {

struct DriftField {
  Matrix grad;                 // d x n, grad U
  std::vector<Matrix> hess;    // Hess U
  Vector log_weight;           // -U / kappa
};

DriftField drift_field(const FlowMeasure& flow, Drift drift, const Grid& grid) {
  const int d = grid.dim();
  const auto n = grid.size();
  DriftField out;
  out.grad.resize(d, n);
  out.hess.resize(static_cast<std::size_t>(n));
  out.log_weight.resize(n);
  const double kappa = drift_kappa(drift);
  const Matrix& g = flow.remaining_inverse();
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const Vector x = grid.node(idx);
    double v = 0.0;
    Vector gv;
    Matrix hv;
    flow.potential().evaluate(x, &v, &gv, &hv);
    if (drift == Drift::ScriptL) {
      gv += g * x;
      hv += g;
      v += 0.5 * x.dot(g * x);
    }
    out.grad.col(idx) = gv;
    out.hess[i] = hv;
    out.log_weight(idx) = -v / kappa;
  });
  return out;
}

struct Derivatives {
  Matrix grad;               // d x n
  std::vector<Vector> hess;  // d*d vectors of length n, row-major (k, l)
};

Derivatives derivatives(const Grid& grid, const Vector& f, int accuracy) {
  const int d = grid.dim();
  Derivatives out;
  out.grad.resize(d, grid.size());
  for (int k = 0; k < d; ++k) out.grad.row(k) = axis_derivative(grid, f, k, 1, accuracy).transpose();
  out.hess.resize(static_cast<std::size_t>(d * d));
  for (int k = 0; k < d; ++k) {
    out.hess[k * d + k] = axis_derivative(grid, f, k, 2, accuracy);
    for (int l = k + 1; l < d; ++l) {
      const Vector a = axis_derivative(grid, out.grad.row(k).transpose(), l, 1, accuracy);
      const Vector b = axis_derivative(grid, out.grad.row(l).transpose(), k, 1, accuracy);
      out.hess[k * d + l] = 0.5 * (a + b);
      out.hess[l * d + k] = out.hess[k * d + l];
    }
  }
  return out;
}

// kappa tr(M H) - <grad U, M grad f> at every node.
Vector apply_nondivergence(const Derivatives& df, const DriftField& u, const Matrix& m,
                           double kappa) {
  const auto d = m.rows();
  const auto n = df.grad.cols();
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double tr = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      for (Eigen::Index l = 0; l < d; ++l) tr += m(k, l) * df.hess[l * d + k](i);
    }
    out(i) = kappa * tr - u.grad.col(i).dot(m * df.grad.col(i));
  }
  return out;
}

}  // namespace

GridFunction generator_fd(const FlowMeasure& flow, const Matrix& mobility, Drift drift,
                          const GridFunction& phi, int accuracy) {
  const auto u = drift_field(flow, drift, phi.grid);
  const auto df = derivatives(phi.grid, phi.values, accuracy);
  return {phi.grid, apply_nondivergence(df, u, mobility, drift_kappa(drift)),
          "generator-" + to_string(drift)};
}

GammaReport gamma_operators(const FlowMeasure& flow, const Matrix& mobility, Drift drift,
                            const GridFunction& phi, int accuracy) {
  const Grid& grid = phi.grid;
  const auto n = grid.size();
  const int d = grid.dim();
  const double kappa = drift_kappa(drift);
  const Matrix& m = mobility;
  const auto u = drift_field(flow, drift, grid);

  // Weighted mass of phi^2 in the band the comparison excludes.
  const Vector trap = grid.trapezoid_weights();
  const double lw_max = u.log_weight.maxCoeff();
  const Vector w = (u.log_weight.array() - lw_max).exp() * trap.array();
  double band = 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = w(i) * phi.values(i) * phi.values(i);
    total += c;
    if (grid.near_boundary(i, accuracy)) band += c;
  }
  if (total > 0.0 && band > 1e-8 * total) {
    throw DomainError("support too large for Γ₂ check");
  }

  const auto dphi = derivatives(grid, phi.values, accuracy);
  const Vector aphi = apply_nondivergence(dphi, u, m, kappa);
  Vector gamma(n);
  Vector expl(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector g = dphi.grad.col(i);
    const Vector mg = m * g;
    gamma(i) = g.dot(mg);
    Matrix h(d, d);
    for (int k = 0; k < d; ++k) {
      for (int l = 0; l < d; ++l) h(k, l) = dphi.hess[k * d + l](i);
    }
    const Matrix mh = m * h;
    expl(i) = kappa * (mh * mh).trace() + mg.dot(u.hess[static_cast<std::size_t>(i)] * mg);
  }
  const auto dgamma = derivatives(grid, gamma, accuracy);
  const Vector agamma = apply_nondivergence(dgamma, u, m, kappa);
  Matrix grad_aphi(d, n);
  for (int k = 0; k < d; ++k) grad_aphi.row(k) = axis_derivative(grid, aphi, k, 1, accuracy).transpose();
  Vector comp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    comp(i) = 0.5 * agamma(i) - dphi.grad.col(i).dot(m * grad_aphi.col(i));
  }

  GammaReport r;
  r.gamma = {grid, gamma, "gamma"};
  r.gamma2_composition = {grid, comp, "gamma2-composition"};
  r.gamma2_explicit = {grid, expl, "gamma2-explicit"};
  r.generator_phi = {grid, aphi, "generator-phi"};
  double diff = 0.0;
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (grid.near_boundary(i, accuracy)) continue;
    diff = std::max(diff, std::abs(comp(i) - expl(i)));
    scale = std::max(scale, std::abs(expl(i)));
  }
  r.relative_error = scale > 0.0 ? diff / scale : diff;
  const double wsum = w.sum();
  r.mean_gamma2 = w.dot(expl) / wsum;
  r.mean_square = w.dot(aphi.cwiseProduct(aphi)) / wsum / kappa;
  return r;
}

std::vector<RayleighPoint> rayleigh_flow_trace(const PolchinskiSemigroup& semigroup,
                                               const TestFunction& phi0,
                                               const std::vector<double>& t_grid,
                                               int grid_points) {
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must increase");
  }
  std::vector<RayleighPoint> out(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    const auto m = flow_moments(semigroup, phi0, t_grid[i], grid_points);
    if (!(m.variance > 1e-14)) throw DomainError("degenerate test function");
    out[i] = {t_grid[i], m.energy / m.variance, m.energy, m.variance};
  });
  return out;
}

}  // namespace rgflow

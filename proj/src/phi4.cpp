#include "rgflow/phi4.hpp"

#include "rgflow/parallel.hpp"
#include "rgflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rgflow {

void Phi4Model::validate() const {
  require_spd(a, "phi4 matrix A");
  if (h.size() != a.rows()) throw DomainError("phi4 field h must have one entry per site");
  if (!(g >= 0.0)) throw DomainError("phi4 coupling g must be >= 0");
  if (g == 0.0) {
    const double lo = min_eigenvalue(a) + nu;
    if (!(lo > 0.0)) {
      std::ostringstream msg;
      msg << "phi4 with g = 0 needs A + nu positive definite; smallest eigenvalue " << lo;
      throw DomainError(msg.str());
    }
  }
}

CovarianceSchedule Phi4Model::schedule() const {
  validate();
  return CovarianceSchedule::pauli_villars(a.inverse());
}

PotentialDescriptor Phi4Model::potential() const { return PotentialDescriptor::phi4_site_sum(g, nu, h); }

Matrix nearest_neighbor_matrix(int n) {
  if (n < 1) throw DomainError("lattice needs at least one site");
  Matrix a = 2.0 * Matrix::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    a(i, i + 1) = -1.0;
    a(i + 1, i) = -1.0;
  }
  return a;
}

std::string to_string(MomentMethod method) {
  return method == MomentMethod::Quadrature ? "quadrature" : "mcmc";
}

namespace {

// -log density up to a constant: 1/2 <x, K x> + g/4 sum x^4 - <b, x>.
struct Energy {
  Matrix k;
  double g;
  Vector b;

  double operator()(const Vector& x) const {
    return 0.5 * x.dot(k * x) + 0.25 * g * x.array().pow(4).sum() - b.dot(x);
  }
};

Energy make_energy(const Phi4Model& model, double mass, const Vector& field) {
  if (field.size() != model.a.rows()) throw DomainError("phi4 field has the wrong dimension");
  Energy e{model.a + (model.nu + mass) * Matrix::Identity(model.a.rows(), model.a.rows()), model.g,
           field};
  if (model.g == 0.0 && !(min_eigenvalue(e.k) > 0.0)) {
    throw DomainError("phi4 measure not normalizable: g = 0 and A + nu + mass not positive definite");
  }
  return e;
}

// The separable minorant U(x) >= sum_j u_j(x_j) with
//   u_j(y) = a/2 y^2 + g/4 y^4 - b_j y,   a = lambda_min(K),
// bounds each coordinate of the region where U stays within `depth` of its
// minimum.
std::vector<std::pair<double, double>> integration_box(const Energy& e, double depth) {
  const auto n = e.b.size();
  const double a = min_eigenvalue(e.k);
  const double g = e.g;
  auto u = [&](Eigen::Index j, double y) { return 0.5 * a * y * y + 0.25 * g * y * y * y * y - e.b(j) * y; };

  // Beyond +-reach(j) each u_j is monotone away from the origin.
  auto reach = [&](Eigen::Index j) {
    if (g == 0.0) return std::abs(e.b(j)) / a + 1.0;
    return 2.0 * (1.0 + std::sqrt(std::abs(a) / g) + std::cbrt(std::abs(e.b(j)) / g));
  };
  constexpr int kScan = 20001;
  auto scan_min = [&](Eigen::Index j) {
    if (g == 0.0) return -e.b(j) * e.b(j) / (2.0 * a);
    const double r = reach(j);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kScan; ++i) best = std::min(best, u(j, -r + 2.0 * r * i / (kScan - 1)));
    return best;
  };
  std::vector<double> mins(static_cast<std::size_t>(n));
  double min_sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    mins[static_cast<std::size_t>(j)] = scan_min(j);
    min_sum += mins[static_cast<std::size_t>(j)];
  }

  // Any point gives an upper bound on min U; a damped Newton run from the
  // separable minimizer gets close to it.
  Vector x = Vector::Zero(n);
  double best = e(x);
  for (int it = 0; it < 50; ++it) {
    const Vector grad = e.k * x + g * x.array().cube().matrix() - e.b;
    Matrix hess = e.k;
    hess.diagonal().array() += 3.0 * g * x.array().square();
    Eigen::LDLT<Matrix> ldlt(hess);
    Vector step = -grad;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(-grad);
    double scale = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Vector y = x + scale * step;
      const double v = e(y);
      if (v < best) {
        best = v;
        x = y;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) break;
  }

  std::vector<std::pair<double, double>> box(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const double level = depth + best - (min_sum - mins[static_cast<std::size_t>(k)]);
    if (g == 0.0) {
      const double c = e.b(k) / a;
      const double w = std::sqrt(std::max(2.0 * (level - mins[static_cast<std::size_t>(k)]) / a, 0.0));
      box[static_cast<std::size_t>(k)] = {c - w, c + w};
      continue;
    }
    double r = reach(k);
    while (u(k, r) <= level || u(k, -r) <= level) r *= 1.5;
    const double h = 2.0 * r / (kScan - 1);
    int first = kScan;
    int last = -1;
    for (int i = 0; i < kScan; ++i) {
      if (u(k, -r + h * i) <= level) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (last < 0) {
      // The sublevel set is thinner than the scan spacing.
      first = last = kScan / 2;
    }
    box[static_cast<std::size_t>(k)] = {-r + h * (first - 1), -r + h * (last + 1)};
  }
  return box;
}

struct Axis {
  std::vector<double> x;
  std::vector<double> log_w;
};

Axis composite_gauss_legendre(double lo, double hi, int nodes, int order) {
  const int panels = std::max(1, nodes / order);
  Vector gx;
  Vector gw;
  gauss_legendre_1d(order, gx, gw);
  Axis out;
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (int i = 0; i < order; ++i) {
      out.x.push_back(mid + 0.5 * width * gx(i));
      out.log_w.push_back(std::log(0.5 * width * gw(i)));
    }
  }
  return out;
}

MomentEstimate quadrature_moments(const Energy& e, int nodes, int order) {
  const auto n = static_cast<int>(e.b.size());
  const auto box = integration_box(e, 50.0);
  std::vector<Axis> axes;
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) {
    axes.push_back(composite_gauss_legendre(box[static_cast<std::size_t>(k)].first,
                                            box[static_cast<std::size_t>(k)].second, nodes, order));
    total *= axes.back().x.size();
  }
  std::vector<double> logp(total);
  Matrix pts(n, static_cast<Eigen::Index>(total));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    double lw = 0.0;
    for (int k = n - 1; k >= 0; --k) {
      const auto& ax = axes[static_cast<std::size_t>(k)];
      const std::size_t i = rest % ax.x.size();
      rest /= ax.x.size();
      pts(k, static_cast<Eigen::Index>(idx)) = ax.x[i];
      lw += ax.log_w[i];
    }
    logp[idx] = lw - e(pts.col(static_cast<Eigen::Index>(idx)));
    top = std::max(top, logp[idx]);
  }
  double z = 0.0;
  Vector mean = Vector::Zero(n);
  for (std::size_t idx = 0; idx < total; ++idx) {
    logp[idx] = std::exp(logp[idx] - top);
    z += logp[idx];
    mean += logp[idx] * pts.col(static_cast<Eigen::Index>(idx));
  }
  mean /= z;
  Matrix cov = Matrix::Zero(n, n);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const Vector d = pts.col(static_cast<Eigen::Index>(idx)) - mean;
    cov.noalias() += logp[idx] * d * d.transpose();
  }
  MomentEstimate out;
  out.mean = mean;
  out.covariance = symmetrize(cov / z);
  out.std_error = Matrix::Zero(n, n);
  out.method = MomentMethod::Quadrature;
  out.n_samples = static_cast<long>(total);
  return out;
}

// Integrated autocorrelation time with Sokal's self-consistent window (c = 5).
double integrated_time(const std::vector<double>& series) {
  const auto n = series.size();
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (c0 == 0.0) return 0.5;
  double tau = 0.5;
  const std::size_t max_lag = n / 10;
  for (std::size_t lag = 1; lag < max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (series[i] - mean) * (series[i + lag] - mean);
    c /= static_cast<double>(n);
    tau += c / c0;
    if (static_cast<double>(lag) >= 5.0 * tau) return std::max(tau, 0.5);
  }
  return std::max(tau, 0.5);
}

MomentEstimate mcmc_moments(const Energy& e, const Phi4Options& opt) {
  const auto n = e.b.size();
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector x = Vector::Zero(n);
  Vector scale = Vector::Constant(n, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) scale(i) = 1.0 / std::sqrt(std::max(e.k(i, i), 1e-3) + e.g);

  auto update = [&](Eigen::Index i) {
    const double old = x(i);
    const double prop = old + scale(i) * (2.0 * unit(rng) - 1.0);
    const double coupling = e.k.row(i).dot(x) - e.k(i, i) * old;
    const double du = 0.5 * e.k(i, i) * (prop * prop - old * old) + (prop - old) * coupling +
                      0.25 * e.g * (prop * prop * prop * prop - old * old * old * old) -
                      e.b(i) * (prop - old);
    if (du <= 0.0 || unit(rng) < std::exp(-du)) {
      x(i) = prop;
      return true;
    }
    return false;
  };

  // Burn-in with per-site step adaptation toward the target acceptance;
  // the steps are frozen afterwards.
  std::vector<int> accepted(static_cast<std::size_t>(n), 0);
  std::vector<int> tried(static_cast<std::size_t>(n), 0);
  for (long step = 0; step < opt.burn_in; ++step) {
    const auto i = static_cast<Eigen::Index>(step % n);
    const auto si = static_cast<std::size_t>(i);
    accepted[si] += update(i) ? 1 : 0;
    if (++tried[si] == 100) {
      const double rate = accepted[si] / 100.0;
      scale(i) *= std::exp(2.0 * (rate - opt.target_acceptance));
      accepted[si] = 0;
      tried[si] = 0;
    }
  }

  const auto sweeps = static_cast<std::size_t>(opt.sweeps);
  std::vector<std::vector<double>> trace(static_cast<std::size_t>(n), std::vector<double>(sweeps));
  for (std::size_t s = 0; s < sweeps; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) update(i);
    for (Eigen::Index i = 0; i < n; ++i) trace[static_cast<std::size_t>(i)][s] = x(i);
  }

  MomentEstimate out;
  out.method = MomentMethod::Mcmc;
  out.seed = opt.seed;
  out.n_samples = opt.sweeps;
  out.mean = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = 0.0;
    for (double v : trace[static_cast<std::size_t>(i)]) m += v;
    out.mean(i) = m / static_cast<double>(sweeps);
  }
  out.covariance = Matrix::Zero(n, n);
  out.std_error = Matrix::Zero(n, n);
  out.min_ess = std::numeric_limits<double>::infinity();
  std::vector<double> prod(sweeps);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const auto& ti = trace[static_cast<std::size_t>(i)];
      const auto& tj = trace[static_cast<std::size_t>(j)];
      double c = 0.0;
      for (std::size_t s = 0; s < sweeps; ++s) {
        prod[s] = (ti[s] - out.mean(i)) * (tj[s] - out.mean(j));
        c += prod[s];
      }
      c /= static_cast<double>(sweeps);
      double var = 0.0;
      for (double v : prod) var += (v - c) * (v - c);
      var /= static_cast<double>(sweeps);
      const double tau = integrated_time(prod);
      const double ess = static_cast<double>(sweeps) / (2.0 * tau);
      out.min_ess = std::min(out.min_ess, ess);
      out.covariance(i, j) = out.covariance(j, i) = c;
      out.std_error(i, j) = out.std_error(j, i) = std::sqrt(var / ess);
    }
  }
  if (out.min_ess < opt.min_ess) {
    std::ostringstream msg;
    msg << "MCMC did not converge: effective sample size " << out.min_ess << " < " << opt.min_ess
        << " after " << opt.sweeps << " sweeps (seed " << opt.seed << ")";
    throw ConvergenceError(msg.str());
  }
  return out;
}

int default_nodes(int n) {
  switch (n) {
    case 1:
      return 400;
    case 2:
      return 200;
    default:
      return 100;
  }
}

}  // namespace

MomentEstimate phi4_moments(const Phi4Model& model, double mass, const Vector& field,
                            const Phi4Options& options) {
  const Energy e = make_energy(model, mass, field);
  const int n = model.sites();
  if (options.force_mcmc || n > 3) return mcmc_moments(e, options);
  const int nodes = options.nodes_per_axis > 0 ? options.nodes_per_axis : default_nodes(n);
  auto out = quadrature_moments(e, nodes, options.panel_order);
  if (options.check_convergence) {
    const auto coarse = quadrature_moments(e, nodes / 2, options.panel_order);
    const double diff = (coarse.covariance - out.covariance).cwiseAbs().maxCoeff();
    out.converged = diff <= 1e-8 * std::max(1.0, out.covariance.cwiseAbs().maxCoeff());
  }
  return out;
}

SusceptibilityEstimate susceptibility(const Phi4Model& model, double t, const Phi4Options& options) {
  if (!(t > 0.0)) throw DomainError("susceptibility needs t > 0");
  const auto m = phi4_moments(model, 1.0 / t, Vector::Zero(model.sites()), options);
  // Zero field and symmetric quartic: second moments are the covariance.
  SusceptibilityEstimate out;
  const Vector rows = m.covariance.rowwise().sum();
  Eigen::Index site = 0;
  out.value = rows.maxCoeff(&site);
  out.site = static_cast<int>(site);
  out.std_error = std::sqrt(m.std_error.row(site).array().square().sum());
  out.method = m.method;
  out.seed = m.seed;
  out.n_samples = m.n_samples;
  out.converged = m.converged;
  return out;
}

MomentEstimate tilted_covariance(const Phi4Model& model, double t, const Vector& phi,
                                 const Phi4Options& options) {
  if (!(t > 0.0)) throw DomainError("tilted covariance needs t > 0");
  const int n = model.sites();
  if (phi.size() != n) throw DomainError("phi has the wrong dimension");
  const Matrix c_inv = model.a + Matrix::Identity(n, n) / t;
  return phi4_moments(model, 1.0 / t, c_inv * phi + model.h, options);
}

double phi4_lambda_prime(double t, double chi) { return 1.0 / t - chi / (t * t); }

double phi4_alpha_formula(const Matrix& a, double t, double sigma_min) {
  const double top = max_eigenvalue(a);
  return 1.0 / t - sigma_min / (t * t) + top * (t * top + 1.0);
}

ExtremalValue sigma_min_search(const Phi4Model& model, double t, const std::vector<Vector>& samples,
                               const Phi4Options& options, int refine_steps) {
  if (samples.empty()) throw DomainError("sigma_min_search: empty sample set");
  Phi4Options quiet = options;
  quiet.check_convergence = false;
  auto objective = [&](const Vector& phi) {
    return min_eigenvalue(tilted_covariance(model, t, phi, quiet).covariance);
  };
  ExtremalValue best;
  best.value = std::numeric_limits<double>::infinity();
  Box bounds{samples.front(), samples.front()};
  for (const auto& phi : samples) {
    const double v = objective(phi);
    ++best.samples_used;
    bounds.lo = bounds.lo.cwiseMin(phi);
    bounds.hi = bounds.hi.cwiseMax(phi);
    if (v < best.value) {
      best.value = v;
      best.argument = phi;
    }
  }
  // Coordinate descent: one axis at a time, halving the step on failure.
  Vector step = 0.0625 * (bounds.hi - bounds.lo);
  for (int it = 0; it < refine_steps; ++it) {
    bool improved = false;
    for (Eigen::Index k = 0; k < best.argument.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        Vector y = best.argument;
        y(k) += sign * step(k);
        const double v = objective(y);
        ++best.samples_used;
        if (v < best.value) {
          best.value = v;
          best.argument = y;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

std::vector<Phi4SchedulePoint> phi4_schedules(const Phi4Model& model,
                                              const std::vector<double>& t_grid,
                                              const Phi4Options& options,
                                              const CurvatureOptions& sampling) {
  model.validate();
  const auto schedule = model.schedule();
  const int n = model.sites();
  for (double t : t_grid) {
    if (!(t > 0.0)) throw DomainError("phi4 schedules need t > 0");
  }
  std::vector<Phi4SchedulePoint> out(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    const double t = t_grid[i];
    Phi4Options local = options;
    local.seed = options.seed + i;
    const auto chi = susceptibility(model, t, local);
    const Box box = curvature_sample_box(schedule, t, sampling.outside_mass);
    std::vector<Vector> samples;
    int steps = sampling.refine_steps;
    if (n <= 3) {
      samples = default_sample_set(box.lo, box.hi, sampling.seed + i, sampling.per_axis,
                                   sampling.random_points);
    } else {
      // Every Sigma evaluation is a full chain here; keep the search small.
      samples = default_sample_set(box.lo, box.hi, sampling.seed + i, 1,
                                   std::min(sampling.random_points, 8));
      samples.push_back(Vector::Zero(n));
      steps = 0;
    }
    const auto sig = sigma_min_search(model, t, samples, local, steps);
    auto& p = out[i];
    p.t = t;
    p.chi = chi.value;
    p.chi_stderr = chi.std_error;
    p.lambda_prime = phi4_lambda_prime(t, chi.value);
    p.sigma_min = sig.value;
    p.sigma_argmin = sig.argument;
    p.alpha_formula = phi4_alpha_formula(model.a, t, sig.value);
    p.samples_used = sig.samples_used;
  });
  return out;
}

HessianIdentityReport hessian_identity_check(const Phi4Model& model, double t,
                                             const std::vector<Vector>& phis,
                                             const Phi4Options& options, double step) {
  model.validate();
  if (!(t > 0.0)) throw DomainError("Hessian identity needs t > 0");
  const int n = model.sites();
  if (n > 3) throw DomainError("Hessian identity check needs at most 3 sites (quadrature path)");
  const auto schedule = model.schedule();
  const Matrix c = schedule.eval(t).c;
  const Matrix c_inv = model.a + Matrix::Identity(n, n) / t;
  const auto v0 = model.potential();
  const auto rule = gauss_hermite_rule(kDefaultQuadratureOrder, n);
  Phi4Options quiet = options;
  quiet.check_convergence = false;

  std::vector<double> errors(phis.size());
  parallel_for(phis.size(), [&](std::size_t p) {
    const Vector& phi = phis[p];
    auto v = [&](const Vector& x) { return renormalized_value(v0, c, x, rule); };
    auto shifted = [&](int i, double di, int j, double dj) {
      Vector x = phi;
      x(i) += di;
      x(j) += dj;
      return v(x);
    };
    const double h = step;
    Matrix fd(n, n);
    const double f0 = v(phi);
    for (int i = 0; i < n; ++i) {
      fd(i, i) = (-shifted(i, 2 * h, i, 0) + 16 * shifted(i, h, i, 0) - 30 * f0 +
                  16 * shifted(i, -h, i, 0) - shifted(i, -2 * h, i, 0)) /
                 (12 * h * h);
      for (int j = i + 1; j < n; ++j) {
        auto cross = [&](double s) {
          return (shifted(i, s, j, s) - shifted(i, s, j, -s) - shifted(i, -s, j, s) +
                  shifted(i, -s, j, -s)) /
                 (4 * s * s);
        };
        fd(i, j) = fd(j, i) = (4.0 * cross(h) - cross(2 * h)) / 3.0;
      }
    }
    const Matrix sigma = tilted_covariance(model, t, phi, quiet).covariance;
    const Matrix identity = c_inv - c_inv * sigma * c_inv;
    errors[p] = (identity - fd).norm() / std::max(fd.norm(), 1.0);
  });
  HessianIdentityReport out;
  out.t = t;
  for (std::size_t p = 0; p < phis.size(); ++p) {
    if (errors[p] >= out.max_relative_error) {
      out.max_relative_error = errors[p];
      out.worst_phi = phis[p];
    }
  }
  return out;
}

}  // namespace rgflow

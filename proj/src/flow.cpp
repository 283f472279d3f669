#include "rgflow/flow.hpp"

#include "rgflow/parallel.hpp"
#include "rgflow/quadrature.hpp"

#include <cmath>
#include <limits>

namespace rgflow {

double nu_log_density(const CovarianceSchedule& schedule, const PotentialDescriptor& v0, double t,
                      const Vector& x, int order) {
  const Matrix g = schedule.remaining_inverse(t);
  const RenormalizedPotential vt(v0, schedule.eval(t).c, order);
  return -0.5 * x.dot(g * x) - vt.value(x);
}

Box default_flow_box(const CovarianceSchedule& schedule, double t, double sigmas) {
  const double var = max_eigenvalue(schedule.remaining(t));
  return Box::cube(schedule.dim(), sigmas * std::sqrt(var));
}

FlowMeasure::FlowMeasure(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                         double t, Grid grid, int order)
    : t_(t),
      grid_(std::move(grid)),
      cov_(schedule.eval(t)),
      remaining_(schedule.remaining(t)),
      remaining_inv_(schedule.remaining_inverse(t)),
      vt_(v0, cov_.c, order) {
  if (grid_.dim() != v0.dim() || schedule.dim() != v0.dim()) {
    throw DomainError("flow measure: grid, schedule and potential dimensions differ");
  }
  const auto n = grid_.size();
  log_nodes_.resize(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    log_nodes_(static_cast<Eigen::Index>(i)) = log_density(grid_.node(static_cast<Eigen::Index>(i)));
  });
  trap_ = grid_.trapezoid_weights();
  log_z_ = log_sum_exp(log_nodes_ + trap_.array().log().matrix());
  log_nodes_.array() -= log_z_;
}

double FlowMeasure::log_density(const Vector& x) const {
  return -0.5 * x.dot(remaining_inv_ * x) - vt_.value(x);
}

double FlowMeasure::expectation(const Vector& node_values) const {
  return (log_nodes_.array().exp() * trap_.array() * node_values.array()).sum();
}

double FlowMeasure::outside_mass_bound() const {
  // Union bound over faces for the dominating Gaussian gamma_{C_inf - C_t}.
  const double sigma = std::sqrt(std::max(max_eigenvalue(remaining_), 0.0));
  if (sigma == 0.0) return 0.0;
  double total = 0.0;
  for (int k = 0; k < grid_.dim(); ++k) {
    const double lo = -grid_.box().lo(k) / sigma;
    const double hi = grid_.box().hi(k) / sigma;
    total += 0.5 * std::erfc(lo / std::sqrt(2.0)) + 0.5 * std::erfc(hi / std::sqrt(2.0));
  }
  return total;
}

TestFunction constant_function(int dim, double c) {
  return {"constant", [c](const Vector&) { return c; },
          [dim](const Vector&) { return Vector(Vector::Zero(dim)); }};
}

TestFunction linear_function(const Vector& a) {
  return {"linear", [a](const Vector& x) { return a.dot(x); }, [a](const Vector&) { return a; }};
}

TestFunction bump_function(const Vector& center, double radius) {
  if (!(radius > 0.0)) throw DomainError("bump radius must be positive");
  const double r2 = radius * radius;
  auto value = [center, r2](const Vector& x) {
    const double q = (x - center).squaredNorm() / r2;
    return q < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0;
  };
  auto gradient = [center, r2](const Vector& x) {
    const Vector dx = x - center;
    const double q = dx.squaredNorm() / r2;
    if (q >= 1.0) return Vector(Vector::Zero(x.size()));
    const double one_minus = 1.0 - q;
    const double v = std::exp(1.0 - 1.0 / one_minus);
    return Vector(-v * 2.0 / (r2 * one_minus * one_minus) * dx);
  };
  return {"bump", value, gradient};
}

TestFunction gaussian_bump(const Vector& center, double width) {
  if (!(width > 0.0)) throw DomainError("bump width must be positive");
  const double w2 = width * width;
  auto value = [center, w2](const Vector& x) {
    return std::exp(-0.5 * (x - center).squaredNorm() / w2);
  };
  auto gradient = [center, w2](const Vector& x) {
    const Vector dx = x - center;
    return Vector(-std::exp(-0.5 * dx.squaredNorm() / w2) / w2 * dx);
  };
  return {"gaussian-bump", value, gradient};
}

PolchinskiSemigroup::PolchinskiSemigroup(CovarianceSchedule schedule, PotentialDescriptor v0,
                                         int order)
    : schedule_(std::move(schedule)), v0_(std::move(v0)), order_(order) {
  if (schedule_.dim() != v0_.dim()) throw DomainError("semigroup: dimension mismatch");
}

double PolchinskiSemigroup::apply(double s, double t, const std::function<double(const Vector&)>& f,
                                  const Vector& x) const {
  if (!(s <= t)) throw DomainError("semigroup needs s <= t");
  const Matrix d = symmetrize(schedule_.eval(t).c - schedule_.eval(s).c);
  TiltedMeasure m;
  if (s == 0.0) {
    m = tilted_measure(v0_, d, x, order_, false, false);
  } else {
    const RenormalizedPotential vs(v0_, schedule_.eval(s).c, order_);
    m = tilted_measure(vs, d, x, order_, false, false);
  }
  double acc = 0.0;
  for (Eigen::Index k = 0; k < m.probabilities.size(); ++k) {
    acc += m.probabilities(k) * f(m.points.col(k));
  }
  return acc;
}

GridFunction PolchinskiSemigroup::apply(double s, double t, const GridFunction& f) const {
  if (!(s <= t)) throw DomainError("semigroup needs s <= t");
  const Matrix d = symmetrize(schedule_.eval(t).c - schedule_.eval(s).c);
  const double width = std::sqrt(std::max(max_eigenvalue(d), 0.0));
  const Vector half = 0.5 * (f.grid.box().hi - f.grid.box().lo);
  if (4.0 * width > half.minCoeff()) {
    throw DomainError("convolution kernel wider than box; enlarge the box");
  }
  GridFunction out{f.grid, Vector(f.grid.size()), f.tag};
  auto eval = [&f](const Vector& y) { return f.at(y); };
  parallel_for(static_cast<std::size_t>(f.grid.size()), [&](std::size_t i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out.values(idx) = apply(s, t, eval, f.grid.node(idx));
  });
  return out;
}

SemigroupSample PolchinskiSemigroup::from_zero(double t, const TestFunction& f,
                                               const Vector& x) const {
  const Matrix c = schedule_.eval(t).c;
  const auto m = tilted_measure(v0_, c, x, order_, true, false);
  const auto k = m.probabilities.size();
  SemigroupSample out;
  out.log_mass = m.log_mass;
  Vector fv(k);
  Matrix fg(x.size(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    fv(j) = f.value(m.points.col(j));
    fg.col(j) = f.gradient(m.points.col(j));
  }
  out.value = m.probabilities.dot(fv);
  const Vector mean_grad_v0 = m.gradients * m.probabilities;
  out.gradient = fg * m.probabilities;
  out.gradient_sq = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double p = m.probabilities(j);
    out.gradient -= p * (fv(j) - out.value) * (m.gradients.col(j) - mean_grad_v0);
    out.gradient_sq += p * fg.col(j).squaredNorm();
  }
  return out;
}

GridFunction semigroup_apply(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                             double s, double t, const GridFunction& f, int order) {
  return PolchinskiSemigroup(schedule, v0, order).apply(s, t, f);
}

FlowMoments flow_moments(const PolchinskiSemigroup& semigroup, const TestFunction& f, double t,
                         int grid_points, double sigmas) {
  const auto& schedule = semigroup.schedule();
  const int d = schedule.dim();
  const Grid grid(default_flow_box(schedule, t, sigmas),
                  std::vector<int>(static_cast<std::size_t>(d), grid_points));
  const Matrix g = schedule.remaining_inverse(t);
  const Matrix cp = schedule.eval(t).cprime;
  const auto n = grid.size();
  Vector logw(n);
  Vector pf(n);
  Vector energy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = grid.node(i);
    const auto s = semigroup.from_zero(t, f, x);
    logw(i) = -0.5 * x.dot(g * x) + s.log_mass;
    pf(i) = s.value;
    energy(i) = s.gradient.dot(cp * s.gradient);
  }
  const Vector trap = grid.trapezoid_weights();
  FlowMoments out;
  out.mean = weighted_mean(logw, trap, pf);
  out.variance = weighted_mean(logw, trap, (pf.array() - out.mean).square().matrix());
  out.energy = weighted_mean(logw, trap, energy);
  return out;
}

ConservationReport conservation_check(const CovarianceSchedule& schedule,
                                      const PotentialDescriptor& v0, const TestFunction& f,
                                      const std::vector<double>& t_grid,
                                      const ConservationOptions& options) {
  if (t_grid.size() < 2 || t_grid.front() != 0.0) {
    throw DomainError("variance decomposition needs a time grid starting at 0");
  }
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must increase");
  }
  const PolchinskiSemigroup sg(schedule, v0, options.order);
  std::vector<FlowMoments> slices(t_grid.size());
  parallel_for(t_grid.size(), [&](std::size_t i) {
    slices[i] = flow_moments(sg, f, t_grid[i], options.grid_points, options.box_sigmas);
  });

  ConservationReport r;
  r.t = t_grid;
  for (const auto& s : slices) {
    r.integrand.push_back(s.energy);
    r.mean.push_back(s.mean);
    r.variance_along.push_back(s.variance);
  }
  r.variance = slices.front().variance;
  r.integral = integrate_samples(r.t, r.integrand);
  r.tail = slices.back().variance;
  r.tail_too_large = r.tail > options.tail_threshold;
  const double gap = std::abs(r.variance - r.integral - r.tail);
  r.mismatch = r.variance > 0.0 ? gap / r.variance : gap;
  const double scale = std::max(1.0, std::abs(r.mean.front()));
  for (double m : r.mean) {
    r.max_mean_drift = std::max(r.max_mean_drift, std::abs(m - r.mean.front()) / scale);
  }
  r.mean_conserved = r.max_mean_drift <= options.mean_tolerance;
  return r;
}

}  // namespace rgflow

#include "rgflow/curvature.hpp"

#include "rgflow/parallel.hpp"
#include "rgflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace rgflow {

double pointwise_curvature(const CovarianceSample& cov, const Matrix& hess) {
  const Matrix m = symmetrize(cov.cprime * hess * cov.cprime - 0.5 * cov.csecond);
  const auto eig = symmetric_eigen(symmetrize(cov.cprime));
  const double top = std::max(eig.values.maxCoeff(), 0.0);
  if (top == 0.0) throw DomainError("C_t' vanishes; curvature undefined");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) > 1e-14 * top) keep.push_back(i);
  }
  // Congruence by C'^{-1/2} on its range turns the pencil into a plain
  // symmetric eigenproblem.
  Matrix p(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    p.col(static_cast<Eigen::Index>(j)) = eig.vectors.col(keep[j]) / std::sqrt(eig.values(keep[j]));
  }
  return min_eigenvalue(symmetrize(p.transpose() * m * p));
}

double pointwise_alpha(const CovarianceSample& cov, const Matrix& remaining_inverse,
                       const Matrix& hess) {
  const Matrix root = psd_sqrt(cov.cprime);
  return max_eigenvalue(symmetrize(root * (hess + remaining_inverse) * root));
}

Box curvature_sample_box(const CovarianceSchedule& schedule, double t, double outside_mass) {
  const int d = schedule.dim();
  const double sigma = std::sqrt(std::max(max_eigenvalue(schedule.remaining(t)), 0.0));
  // Smallest z with d * P(|N(0,1)| > z) <= outside_mass.
  double lo = 0.0;
  double hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (d * std::erfc(mid / std::sqrt(2.0)) > outside_mass) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return Box::cube(d, hi * sigma);
}

namespace {

// Pattern search on the box: try +-step along each axis, move to the best
// improving neighbour, halve the step when none improves.
ExtremalValue refine_extremum(const std::function<double(const Vector&)>& objective,
                              ExtremalValue best, const Box& box, int steps, bool minimize) {
  Vector step = 0.0625 * (box.hi - box.lo);
  auto better = [minimize](double a, double b) { return minimize ? a < b : a > b; };
  for (int it = 0; it < steps; ++it) {
    Vector cand_best = best.argument;
    double val_best = best.value;
    for (Eigen::Index k = 0; k < best.argument.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        Vector y = best.argument;
        y(k) = std::clamp(y(k) + sign * step(k), box.lo(k), box.hi(k));
        const double v = objective(y);
        ++best.samples_used;
        if (better(v, val_best)) {
          val_best = v;
          cand_best = y;
        }
      }
    }
    if (better(val_best, best.value)) {
      best.value = val_best;
      best.argument = cand_best;
    } else {
      step *= 0.5;
    }
  }
  return best;
}

ExtremalValue extremum(const std::function<double(const Vector&)>& objective,
                       const std::vector<Vector>& samples, const Box& box, int steps,
                       bool minimize) {
  if (samples.empty()) throw DomainError("empty sample set");
  ExtremalValue best;
  best.value = minimize ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
  for (const auto& x : samples) {
    const double v = objective(x);
    ++best.samples_used;
    if (minimize ? v < best.value : v > best.value) {
      best.value = v;
      best.argument = x;
    }
  }
  return refine_extremum(objective, best, box, steps, minimize);
}

Box sample_bounds(const std::vector<Vector>& samples) {
  Box b{samples.front(), samples.front()};
  for (const auto& x : samples) {
    b.lo = b.lo.cwiseMin(x);
    b.hi = b.hi.cwiseMax(x);
  }
  return b;
}

}  // namespace

ExtremalValue multiscale_margin(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                                double t, const std::vector<Vector>& samples,
                                const CurvatureOptions& options) {
  if (samples.empty()) throw DomainError("multiscale_margin: empty sample set");
  const auto cov = schedule.eval(t);
  const RenormalizedPotential vt(v0, cov.c, options.order);
  auto objective = [&](const Vector& x) {
    Matrix h;
    vt.evaluate(x, nullptr, nullptr, &h);
    return pointwise_curvature(cov, h);
  };
  return extremum(objective, samples, sample_bounds(samples), options.refine_steps, true);
}

ExtremalValue alpha_prime(const CovarianceSchedule& schedule, const PotentialDescriptor& v0,
                          double t, const std::vector<Vector>& samples,
                          const CurvatureOptions& options) {
  if (samples.empty()) throw DomainError("alpha_prime: empty sample set");
  const auto cov = schedule.eval(t);
  const Matrix g = schedule.remaining_inverse(t);
  const RenormalizedPotential vt(v0, cov.c, options.order);
  auto objective = [&](const Vector& x) {
    Matrix h;
    vt.evaluate(x, nullptr, nullptr, &h);
    return pointwise_alpha(cov, g, h);
  };
  return extremum(objective, samples, sample_bounds(samples), options.refine_steps, false);
}

std::size_t CurvatureSchedule::index_of(double time) const {
  const auto it = std::lower_bound(t.begin(), t.end(), time - 1e-12 * std::max(1.0, std::abs(time)));
  if (it == t.end() || std::abs(*it - time) > 1e-12 * std::max(1.0, std::abs(time))) {
    std::ostringstream msg;
    msg << "time " << time << " is not on the curvature grid";
    throw DomainError(msg.str());
  }
  return static_cast<std::size_t>(it - t.begin());
}

CurvatureSchedule integrate_schedules(const std::vector<double>& t,
                                      const std::vector<double>& lambda_prime,
                                      const std::vector<double>& alpha_prime) {
  if (t.empty() || t.size() != lambda_prime.size() || t.size() != alpha_prime.size()) {
    throw DomainError("integrate_schedules: arrays must be nonempty and of equal length");
  }
  if (t.front() != 0.0) throw DomainError("integrate_schedules: time grid must start at 0");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) throw DomainError("integrate_schedules: time grid must increase");
  }
  CurvatureSchedule out;
  out.t = t;
  out.lambda_prime = lambda_prime;
  out.alpha_prime = alpha_prime;
  out.lambda_int = cumulative_trapezoid(t, lambda_prime);
  out.alpha_int = cumulative_trapezoid(t, alpha_prime);
  out.samples_used.assign(t.size(), 0);
  return out;
}

CurvatureSchedule curvature_schedule(const CovarianceSchedule& schedule,
                                     const PotentialDescriptor& v0,
                                     const std::vector<double>& t_grid,
                                     const CurvatureOptions& options) {
  if (t_grid.empty()) throw DomainError("curvature schedule needs a time grid");
  if (options.subdivisions < 2 || options.subdivisions % 2 != 0) {
    throw DomainError("curvature schedule subdivisions must be even and >= 2");
  }
  std::vector<double> user = t_grid;
  if (user.front() < 0.0) throw DomainError("curvature schedule needs t >= 0");
  if (user.front() > 0.0) user.insert(user.begin(), 0.0);
  for (std::size_t i = 1; i < user.size(); ++i) {
    if (!(user[i] > user[i - 1])) throw DomainError("curvature time grid must increase");
  }
  std::vector<double> nodes{0.0};
  for (std::size_t i = 1; i < user.size(); ++i) {
    for (int j = 1; j <= options.subdivisions; ++j) {
      nodes.push_back(j == options.subdivisions
                          ? user[i]
                          : user[i - 1] + (user[i] - user[i - 1]) * j / options.subdivisions);
    }
  }

  std::vector<double> lp(nodes.size());
  std::vector<double> ap(nodes.size());
  std::vector<int> used(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t i) {
    const Box box = curvature_sample_box(schedule, nodes[i], options.outside_mass);
    const auto samples = default_sample_set(box.lo, box.hi, options.seed + i, options.per_axis,
                                            options.random_points);
    const auto cov = schedule.eval(nodes[i]);
    const Matrix g = schedule.remaining_inverse(nodes[i]);
    const RenormalizedPotential vt(v0, cov.c, options.order);
    // Both searches start from the same samples; each Hessian is computed once.
    std::map<std::vector<double>, Matrix> cache;
    auto hessian = [&](const Vector& x) -> const Matrix& {
      std::vector<double> key(x.data(), x.data() + x.size());
      auto it = cache.find(key);
      if (it == cache.end()) {
        Matrix h;
        vt.evaluate(x, nullptr, nullptr, &h);
        it = cache.emplace(std::move(key), std::move(h)).first;
      }
      return it->second;
    };
    const Box bounds = sample_bounds(samples);
    const auto l = extremum([&](const Vector& x) { return pointwise_curvature(cov, hessian(x)); },
                            samples, bounds, options.refine_steps, true);
    const auto a = extremum([&](const Vector& x) { return pointwise_alpha(cov, g, hessian(x)); },
                            samples, bounds, options.refine_steps, false);
    lp[i] = l.value;
    ap[i] = a.value;
    used[i] = l.samples_used;
  });

  auto out = integrate_schedules(nodes, lp, ap);
  out.samples_used = used;
  std::ostringstream spec;
  spec << options.per_axis << "^d grid + " << options.random_points
       << " seeded points on the 1-" << options.outside_mass << " mass box, "
       << options.refine_steps << " pattern-search steps";
  out.sample_spec = spec.str();

  std::vector<double> ct;
  std::vector<double> cl;
  for (std::size_t i = 0; i < nodes.size(); i += 2) {
    ct.push_back(nodes[i]);
    cl.push_back(lp[i]);
  }
  const auto coarse = cumulative_trapezoid(ct, cl);
  for (std::size_t i = 0; i < ct.size(); ++i) {
    out.refinement_change =
        std::max(out.refinement_change, std::abs(coarse[i] - out.lambda_int[2 * i]));
  }
  out.refinement_ok = out.refinement_change <= options.refinement_tolerance;
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> ordered_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

namespace {

double exponent_between(const CurvatureSchedule& curv, double s, double t) {
  return (curv.alpha_at(t) - curv.alpha_at(s)) - 2.0 * (curv.lambda_at(t) - curv.lambda_at(s));
}

}  // namespace

std::vector<PairMargin> theorem_margin(const std::vector<double>& times,
                                       const std::vector<double>& poincare,
                                       const CurvatureSchedule& curv) {
  if (times.size() != poincare.size()) throw DomainError("theorem_margin: trace length mismatch");
  std::vector<PairMargin> out;
  for (const auto& [i, j] : ordered_pairs(times.size())) {
    if (!(times[i] < times[j])) throw DomainError("theorem_margin: trace times must increase");
    PairMargin m{times[i], times[j], 1, exponent_between(curv, times[i], times[j]), 0.0};
    m.margin = m.exponent + std::log(poincare[j]) - std::log(poincare[i]);
    out.push_back(m);
  }
  return out;
}

std::vector<PairMargin> higher_eigenvalue_margin(const std::vector<double>& times,
                                                 const std::vector<Vector>& eigenvalues,
                                                 const CurvatureSchedule& curv) {
  if (times.size() != eigenvalues.size()) {
    throw DomainError("higher_eigenvalue_margin: trace length mismatch");
  }
  std::vector<PairMargin> out;
  for (const auto& [i, j] : ordered_pairs(times.size())) {
    if (!(times[i] < times[j])) throw DomainError("higher_eigenvalue_margin: times must increase");
    const double e = exponent_between(curv, times[i], times[j]);
    const auto top = std::min(eigenvalues[i].size(), eigenvalues[j].size());
    for (Eigen::Index k = 1; k < top; ++k) {
      PairMargin m{times[i], times[j], static_cast<int>(k), e, 0.0};
      m.margin = e + std::log(eigenvalues[i](k)) - std::log(eigenvalues[j](k));
      out.push_back(m);
    }
  }
  return out;
}

PoincareBound poincare_upper_bound(const CurvatureSchedule& curv, double speed, double s) {
  const std::size_t first = curv.index_of(s);
  const std::size_t n = curv.t.size();
  if (first + 1 >= n) throw DomainError("Poincaré bound needs grid times beyond s");
  PoincareBound out;
  out.s = s;
  out.speed = speed;
  std::vector<double> tt(curv.t.begin() + static_cast<std::ptrdiff_t>(first), curv.t.end());
  std::vector<double> ff;
  for (std::size_t i = first; i < n; ++i) {
    ff.push_back(std::exp(-2.0 * (curv.lambda_int[i] - curv.lambda_int[first])));
  }
  out.integral = cumulative_trapezoid(tt, ff).back();

  const double big_t = curv.t.back();
  std::size_t w0 = n - 1;
  while (w0 > 0 && curv.t[w0 - 1] >= 0.5 * big_t) --w0;
  w0 = std::min(w0, n - 2);
  double floor_rate = std::numeric_limits<double>::infinity();
  double peak_rate = -std::numeric_limits<double>::infinity();
  double kappa = std::numeric_limits<double>::infinity();
  for (std::size_t i = w0; i < n; ++i) {
    floor_rate = std::min(floor_rate, curv.lambda_prime[i]);
    peak_rate = std::max(peak_rate, curv.lambda_prime[i]);
    kappa = std::min(kappa, curv.t[i] * curv.lambda_prime[i]);
  }
  const double decay = ff.back();
  const bool decaying = curv.lambda_prime.back() < 0.9 * peak_rate;
  if (!decaying && floor_rate > 0.0) {
    out.tail_model = "exponential";
    out.tail = decay / (2.0 * floor_rate);
  } else if (decaying && kappa > 0.5) {
    out.tail_model = "power";
    out.tail = decay * big_t / (2.0 * kappa - 1.0);
  } else {
    throw DomainError("bound divergent: lambda' gives a non-integrable tail beyond T");
  }
  out.weighted = out.integral + out.tail;
  out.unweighted = speed * out.weighted;
  return out;
}

IntertwiningReport intertwining_check(const PolchinskiSemigroup& semigroup, const TestFunction& f,
                                      double t, const CurvatureSchedule& curv,
                                      int points_per_axis) {
  const auto& schedule = semigroup.schedule();
  const Box box = curvature_sample_box(schedule, t);
  const Grid grid(box, std::vector<int>(static_cast<std::size_t>(schedule.dim()), points_per_axis));
  const Matrix cp = schedule.eval(t).cprime;
  const double factor = schedule.speed_radius(0.0) * std::exp(-2.0 * curv.lambda_at(t));
  const auto n = static_cast<std::size_t>(grid.size());
  std::vector<double> excess(n);
  std::vector<double> lhs(n);
  parallel_for(n, [&](std::size_t i) {
    const auto sample = semigroup.from_zero(t, f, grid.node(static_cast<Eigen::Index>(i)));
    lhs[i] = sample.gradient.dot(cp * sample.gradient);
    excess[i] = lhs[i] - factor * sample.gradient_sq;
  });
  IntertwiningReport out;
  out.t = t;
  out.points = static_cast<int>(n);
  const auto worst = std::max_element(excess.begin(), excess.end());
  out.max_violation = *worst;
  out.worst_point = grid.node(static_cast<Eigen::Index>(worst - excess.begin()));
  out.max_lhs = *std::max_element(lhs.begin(), lhs.end());
  return out;
}

LemmaReport lemma_check(const std::vector<double>& times, const std::vector<double>& quotients,
                        const CurvatureSchedule& curv) {
  if (times.size() != quotients.size()) throw DomainError("lemma_check: trace length mismatch");
  LemmaReport out;
  out.max_pair_excess = -std::numeric_limits<double>::infinity();
  out.max_rate_excess = -std::numeric_limits<double>::infinity();
  for (const auto& [i, j] : ordered_pairs(times.size())) {
    const double excess = std::log(quotients[j]) - std::log(quotients[i]) -
                          exponent_between(curv, times[i], times[j]);
    out.max_pair_excess = std::max(out.max_pair_excess, excess);
    if (j == i + 1) out.max_rate_excess = std::max(out.max_rate_excess, excess / (times[j] - times[i]));
  }
  return out;
}

}  // namespace rgflow

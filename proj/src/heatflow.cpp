#include "rgflow/heatflow.hpp"

#include "rgflow/grid.hpp"
#include "rgflow/parallel.hpp"
#include "rgflow/spectral.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rgflow {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Phi(b) - Phi(a) for a <= b without cancellation in either tail.
double normal_mass(double a, double b) {
  if (a >= 0.0) return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
  return 1.0 - 0.5 * (std::erfc(-a * kInvSqrt2) + std::erfc(b * kInvSqrt2));
}

double normal_pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

double table_value(const DensityTable& t, double y) {
  const auto n = t.x.size();
  if (y < t.x.front() || y > t.x.back()) return 0.0;
  const double h = t.x[1] - t.x[0];
  auto i = static_cast<std::size_t>(std::floor((y - t.x.front()) / h));
  if (i >= n - 1) i = n - 2;
  const double u = (y - t.x[i]) / h;
  return (1.0 - u) * t.density[i] + u * t.density[i + 1];
}

double trapezoid_mass(const DensityTable& t) {
  double m = 0.0;
  for (std::size_t i = 1; i < t.x.size(); ++i) {
    m += 0.5 * (t.x[i] - t.x[i - 1]) * (t.density[i] + t.density[i - 1]);
  }
  return m;
}

void validate(const DensityTable& t) {
  if (t.x.size() < 2 || t.x.size() != t.density.size()) {
    throw DomainError("density table needs at least two (x, density) rows");
  }
  const double h = t.x[1] - t.x[0];
  if (!(h > 0.0)) throw DomainError("density table x must increase strictly");
  for (std::size_t i = 1; i < t.x.size(); ++i) {
    const double hi = t.x[i] - t.x[i - 1];
    if (!(hi > 0.0)) throw DomainError("density table x must increase strictly");
    if (std::abs(hi - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw DomainError("density table needs uniform x spacing");
    }
  }
  for (double v : t.density) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("density values must be finite and >= 0");
  }
}

}  // namespace

DensityTable read_density_table(std::istream& in) {
  DensityTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (char& ch : line) {
      if (ch == ',') ch = ' ';
    }
    std::istringstream ss(line);
    double x = 0.0;
    double p = 0.0;
    if (!(ss >> x)) continue;
    if (!(ss >> p)) throw DomainError("density table row has fewer than two columns: '" + line + "'");
    t.x.push_back(x);
    t.density.push_back(p);
  }
  validate(t);
  return t;
}

DensityTable load_density_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open density table '" + path + "'");
  return read_density_table(in);
}

DensityTable tabulate_density(double lo, double hi, int n, double (*density)(double)) {
  if (n < 2 || !(hi > lo)) throw DomainError("tabulate_density needs n >= 2 and hi > lo");
  DensityTable t;
  for (int i = 0; i < n; ++i) {
    const double x = i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1);
    t.x.push_back(x);
    t.density.push_back(density(x));
  }
  return t;
}

double log_convolved_density(const DensityTable& table, double s, double y) {
  if (s < 0.0) throw DomainError("heat-flow time must be >= 0");
  if (s == 0.0) {
    const double v = table_value(table, y);
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  }
  const double sigma = std::sqrt(s);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < table.x.size(); ++i) {
    const double a = table.x[i];
    const double b = table.x[i + 1];
    const double pa = table.density[i];
    const double pb = table.density[i + 1];
    if (pa == 0.0 && pb == 0.0) continue;
    // rho(x) = alpha + beta x on [a, b]; integrate against the N(y, s) kernel.
    const double beta = (pb - pa) / (b - a);
    const double alpha = pa - beta * a;
    const double ua = (a - y) / sigma;
    const double ub = (b - y) / sigma;
    total += (alpha + beta * y) * normal_mass(ua, ub) + beta * sigma * (normal_pdf(ua) - normal_pdf(ub));
  }
  return total > 0.0 ? std::log(total) : std::log(std::numeric_limits<double>::min());
}

bool is_log_concave(const DensityTable& table, double tol) {
  const auto n = table.density.size();
  std::size_t first = n;
  std::size_t last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (table.density[i] > 0.0) {
      first = std::min(first, i);
      last = i;
    }
  }
  if (first == n) return false;
  for (std::size_t i = first; i <= last; ++i) {
    if (!(table.density[i] > 0.0)) return false;
  }
  for (std::size_t i = first + 1; i < last; ++i) {
    const double mid = 2.0 * std::log(table.density[i]);
    const double ends = std::log(table.density[i - 1]) + std::log(table.density[i + 1]);
    if (mid < ends - tol) return false;
  }
  return true;
}

namespace {

double poincare_at(const DensityTable& t, double s, const HeatflowOptions& opt, bool& converged) {
  const double widen = s > 0.0 ? opt.tail_sigmas * std::sqrt(s) : 0.0;
  double lo = t.x.front();
  double hi = t.x.back();
  if (s == 0.0) {
    // The support of the table: first to last positive node, extended to the
    // neighbouring zero nodes where the linear pieces end.
    std::size_t first = 0;
    while (first + 1 < t.x.size() && t.density[first] == 0.0 && t.density[first + 1] == 0.0) {
      ++first;
    }
    std::size_t last = t.x.size() - 1;
    while (last > 0 && t.density[last] == 0.0 && t.density[last - 1] == 0.0) --last;
    lo = t.x[first];
    hi = t.x[last];
  }
  const Grid grid(Box{Vector::Constant(1, lo - widen), Vector::Constant(1, hi + widen)},
                  {opt.grid_points});
  const Grid refined = grid.refined();
  Vector log_w(refined.size());
  for (Eigen::Index i = 0; i < refined.size(); ++i) {
    log_w(i) = log_convolved_density(t, s, refined.coordinate(0, static_cast<int>(i)));
  }
  // Endpoints of a support box can carry zero density (a linear piece ending
  // at zero); floor them so the weight stays finite.
  const double floor_log = log_w.maxCoeff() - 700.0;
  for (Eigen::Index i = 0; i < log_w.size(); ++i) {
    if (!(log_w(i) > floor_log)) log_w(i) = floor_log;
  }
  const auto gen = assemble_generator(grid, log_w, Matrix::Identity(1, 1), 1.0, s, Drift::Lambda, true);
  const auto spec = spectrum(gen, 1);
  converged = spec.converged;
  return spec.poincare_constant;
}

}  // namespace

HeatflowTrace heatflow_harness(const DensityTable& mu0, const std::vector<double>& s_grid,
                               const HeatflowOptions& options) {
  validate(mu0);
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (s_grid[i] < 0.0 || (i > 0 && !(s_grid[i] > s_grid[i - 1]))) {
      throw DomainError("heat-flow s grid must be nonnegative and increasing");
    }
  }
  HeatflowTrace out;
  DensityTable table = mu0;
  out.input_mass = trapezoid_mass(mu0);
  if (!(out.input_mass > 0.0)) throw DomainError("density table has zero mass");
  if (std::abs(out.input_mass - 1.0) > 1e-6) {
    out.renormalized = true;
    for (double& v : table.density) v /= out.input_mass;
  }
  out.log_concave = is_log_concave(table);
  out.s = s_grid;
  out.poincare.assign(s_grid.size(), 0.0);
  std::vector<char> conv(s_grid.size(), 1);
  parallel_for(s_grid.size(), [&](std::size_t i) {
    bool c = true;
    out.poincare[i] = poincare_at(table, s_grid[i], options, c);
    conv[i] = c ? 1 : 0;
  });
  for (char c : conv) out.converged.push_back(c != 0);
  for (std::size_t i = 1; i < out.poincare.size(); ++i) {
    out.max_decrease = std::max(out.max_decrease, out.poincare[i - 1] - out.poincare[i]);
  }
  out.monotone = out.max_decrease <= options.monotone_tolerance;
  bool c0 = true;
  bool c1 = true;
  out.cp_mu = poincare_at(table, 0.0, options, c0);
  out.cp_mu_gamma1 = poincare_at(table, 1.0, options, c1);
  out.deconvolution_bound = out.cp_mu_gamma1 - 1.0 <= out.cp_mu + options.monotone_tolerance;
  return out;
}

}  // namespace rgflow

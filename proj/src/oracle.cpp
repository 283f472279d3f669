#include "rgflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace rgflow::oracle {
namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b,
                    double fb, double m, double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
  // Split into fixed panels first so narrow features are not skipped by the
  // initial coarse estimate.
  constexpr int kPanels = 64;
  double total = 0.0;
  const double h = (b - a) / kPanels;
  for (int p = 0; p < kPanels; ++p) {
    const double lo = a + p * h;
    const double hi = p + 1 == kPanels ? b : lo + h;
    const double m = 0.5 * (lo + hi);
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fm = f(m);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
    total += simpson_step(f, lo, flo, hi, fhi, m, fm, whole, tol / kPanels, max_depth);
  }
  return total;
}

GaussianPotential gaussian_renormalized(double beta, double c, double x) {
  const double s = 1.0 + beta * c;
  return {beta * x * x / (2.0 * s) + 0.5 * std::log(s), beta * x / s, beta / s};
}

double renormalized_value_1d(const std::function<double(double)>& v0, double c, double x,
                             double v0_floor, double tol) {
  if (c == 0.0) return v0(x);
  const double sd = std::sqrt(c);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * c);
  auto integrand = [&](double z) {
    return norm * std::exp(-0.5 * z * z / c - (v0(x + z) - v0_floor));
  };
  const double integral = adaptive_simpson(integrand, -14.0 * sd, 14.0 * sd, tol);
  return v0_floor - std::log(integral);
}

Moments1d moments_1d(const std::function<double(double)>& u, double lo, double hi, double tol) {
  // Shift by the minimum on a fine scan so the integrand peaks near 1.
  double umin = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 4000; ++i) umin = std::min(umin, u(lo + (hi - lo) * i / 4000.0));
  auto w = [&](double y) { return std::exp(-(u(y) - umin)); };
  const double z = adaptive_simpson(w, lo, hi, tol);
  const double m1 = adaptive_simpson([&](double y) { return y * w(y); }, lo, hi, tol) / z;
  const double m2 = adaptive_simpson([&](double y) { return y * y * w(y); }, lo, hi, tol) / z;
  const double var = adaptive_simpson([&](double y) { return (y - m1) * (y - m1) * w(y); }, lo, hi,
                                      tol) /
                     z;
  return {z * std::exp(-umin), m1, var, m2};
}

std::array<double, 3> covariance_2d(const std::function<double(double, double)>& u, double lo,
                                    double hi, int points) {
  const double h = (hi - lo) / (points - 1);
  std::vector<double> vals(static_cast<std::size_t>(points) * static_cast<std::size_t>(points));
  double umin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    for (int j = 0; j < points; ++j) {
      const double v = u(lo + i * h, lo + j * h);
      vals[static_cast<std::size_t>(i * points + j)] = v;
      umin = std::min(umin, v);
    }
  }
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < points; ++i) {
    for (int j = 0; j < points; ++j) {
      const double wi = (i == 0 || i == points - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == points - 1) ? 0.5 : 1.0;
      const double p = wi * wj * std::exp(-(vals[static_cast<std::size_t>(i * points + j)] - umin));
      z += p;
      m1 += p * (lo + i * h);
      m2 += p * (lo + j * h);
    }
  }
  m1 /= z;
  m2 /= z;
  double c11 = 0.0, c12 = 0.0, c22 = 0.0;
  for (int i = 0; i < points; ++i) {
    for (int j = 0; j < points; ++j) {
      const double wi = (i == 0 || i == points - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == points - 1) ? 0.5 : 1.0;
      const double p = wi * wj * std::exp(-(vals[static_cast<std::size_t>(i * points + j)] - umin));
      const double a = lo + i * h - m1;
      const double b = lo + j * h - m2;
      c11 += p * a * a;
      c12 += p * a * b;
      c22 += p * b * b;
    }
  }
  return {c11 / z, c12 / z, c22 / z};
}

namespace {

// Number of eigenvalues below x of the symmetric tridiagonal (d, e).
int sturm_count(const std::vector<double>& d, const std::vector<double>& e, double x) {
  int count = 0;
  double q = d[0] - x;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double prev = q == 0.0 ? 1e-300 : q;
    q = d[i] - x - e[i - 1] * e[i - 1] / prev;
    if (q < 0.0) ++count;
  }
  return count;
}

}  // namespace

std::vector<double> sturm_liouville_eigenvalues(const std::function<double(double)>& log_w,
                                                double lo, double hi, double mobility, int nodes,
                                                int count) {
  if (nodes < 3 || count < 1 || count > nodes) throw std::invalid_argument("bad oracle grid");
  const double h = (hi - lo) / (nodes - 1);
  std::vector<double> lw(static_cast<std::size_t>(nodes));
  std::vector<double> lw_mid(static_cast<std::size_t>(nodes - 1));
  for (int i = 0; i < nodes; ++i) lw[static_cast<std::size_t>(i)] = log_w(lo + i * h);
  for (int i = 0; i + 1 < nodes; ++i) lw_mid[static_cast<std::size_t>(i)] = log_w(lo + (i + 0.5) * h);
  // Lumped mass m_i = w_i h (half at the ends), conductance k = mobility w_mid / h.
  auto log_mass = [&](int i) {
    const double half = (i == 0 || i == nodes - 1) ? std::log(0.5) : 0.0;
    return lw[static_cast<std::size_t>(i)] + std::log(h) + half;
  };
  const double log_k0 = std::log(mobility / h);
  std::vector<double> d(static_cast<std::size_t>(nodes), 0.0);
  std::vector<double> e(static_cast<std::size_t>(nodes - 1), 0.0);
  for (int i = 0; i + 1 < nodes; ++i) {
    const double lk = log_k0 + lw_mid[static_cast<std::size_t>(i)];
    d[static_cast<std::size_t>(i)] += std::exp(lk - log_mass(i));
    d[static_cast<std::size_t>(i + 1)] += std::exp(lk - log_mass(i + 1));
    e[static_cast<std::size_t>(i)] = -std::exp(lk - 0.5 * (log_mass(i) + log_mass(i + 1)));
  }
  double upper = 0.0;
  for (int i = 0; i < nodes; ++i) {
    double r = std::abs(d[static_cast<std::size_t>(i)]);
    if (i > 0) r += std::abs(e[static_cast<std::size_t>(i - 1)]);
    if (i + 1 < nodes) r += std::abs(e[static_cast<std::size_t>(i)]);
    upper = std::max(upper, r);
  }
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    double a = -1e-12 * upper - 1e-300;
    double b = upper;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
      const double m = 0.5 * (a + b);
      if (sturm_count(d, e, m) > k) {
        b = m;
      } else {
        a = m;
      }
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

std::vector<double> sturm_liouville_richardson(const std::function<double(double)>& log_w,
                                               double lo, double hi, double mobility, int nodes,
                                               int count) {
  const auto coarse = sturm_liouville_eigenvalues(log_w, lo, hi, mobility, nodes, count);
  const auto fine = sturm_liouville_eigenvalues(log_w, lo, hi, mobility, 2 * nodes - 1, count);
  std::vector<double> out(fine.size());
  for (std::size_t k = 0; k < fine.size(); ++k) out[k] = (4.0 * fine[k] - coarse[k]) / 3.0;
  return out;
}

ScalarSchedule heat_kernel_scalar(double v, double t) {
  const double e = std::exp(-t / v);
  return {v * (1.0 - e), e, -e / v};
}

ScalarSchedule pauli_villars_scalar(double a, double t) {
  const double s = t * a + 1.0;
  return {t / s, 1.0 / (s * s), -2.0 * a / (s * s * s)};
}

}  // namespace rgflow::oracle

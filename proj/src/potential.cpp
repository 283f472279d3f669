#include "rgflow/potential.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rgflow {
namespace {

// Minimum of g x^4/4 + nu x^2/2 - h x over the real line.
double quartic_minimum(double g, double nu, double h) {
  if (g == 0.0) {
    if (nu > 0.0) return -h * h / (2.0 * nu);
    if (nu == 0.0 && h == 0.0) return 0.0;
    return -std::numeric_limits<double>::infinity();
  }
  auto f = [&](double x) { return 0.25 * g * x * x * x * x + 0.5 * nu * x * x - h * x; };
  // Critical points lie within the Cauchy bound of g x^3 + nu x - h.
  const double r = 1.0 + (std::abs(nu) + std::abs(h)) / g;
  double best_x = 0.0;
  double best = f(0.0);
  constexpr int kScan = 4001;
  for (int i = 0; i < kScan; ++i) {
    const double x = -r + 2.0 * r * i / (kScan - 1);
    if (f(x) < best) {
      best = f(x);
      best_x = x;
    }
  }
  double x = best_x;
  for (int it = 0; it < 50; ++it) {
    const double d1 = g * x * x * x + nu * x - h;
    const double d2 = 3.0 * g * x * x + nu;
    if (d2 <= 0.0) break;
    const double next = x - d1 / d2;
    if (std::abs(next - x) < 1e-15 * (1.0 + std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return std::min(best, f(x));
}

struct ReducedGaussian {
  Matrix basis;  // d x r, columns scaled by sqrt of the retained eigenvalues
  int rank = 0;
};

ReducedGaussian reduce_covariance(const Matrix& c) {
  ReducedGaussian out;
  const auto d = c.rows();
  if (d == 1) {
    const double v = c(0, 0);
    if (v > 1e-13 * std::max(1.0, v)) {
      out.basis = Matrix::Constant(1, 1, std::sqrt(v));
      out.rank = 1;
    } else {
      out.basis.resize(1, 0);
    }
    return out;
  }
  const auto eig = symmetric_eigen(c);
  const double cmax = std::max(eig.values.maxCoeff(), 0.0);
  const double cut = 1e-13 * std::max(1.0, cmax);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) > cut) keep.push_back(i);
  }
  out.rank = static_cast<int>(keep.size());
  out.basis.resize(d, out.rank);
  for (int j = 0; j < out.rank; ++j) {
    out.basis.col(j) = eig.vectors.col(keep[j]) * std::sqrt(eig.values(keep[j]));
  }
  return out;
}

}  // namespace

PotentialDescriptor PotentialDescriptor::zero(int dim) {
  if (dim < 1) throw DomainError("potential dimension must be >= 1");
  PotentialDescriptor p;
  p.form_ = PotentialForm::Zero;
  p.dim_ = dim;
  return p;
}

PotentialDescriptor PotentialDescriptor::quadratic(const Matrix& b) {
  if (b.rows() < 1 || !is_symmetric(b, 1e-12)) {
    throw DomainError("quadratic potential needs a symmetric matrix B");
  }
  PotentialDescriptor p;
  p.form_ = PotentialForm::Quadratic;
  p.dim_ = static_cast<int>(b.rows());
  p.b_ = symmetrize(b);
  return p;
}

PotentialDescriptor PotentialDescriptor::polynomial(const Vector& quartic, const Vector& quadratic,
                                                    const Vector& linear) {
  const auto n = quartic.size();
  if (n < 1 || quadratic.size() != n || linear.size() != n) {
    throw DomainError("polynomial potential coefficient vectors must share a length >= 1");
  }
  if ((quartic.array() < 0.0).any()) {
    throw DomainError("quartic coefficients must be >= 0 for integrability");
  }
  if (!quartic.allFinite() || !quadratic.allFinite() || !linear.allFinite()) {
    throw DomainError("polynomial potential has non-finite coefficients");
  }
  PotentialDescriptor p;
  p.form_ = PotentialForm::Polynomial;
  p.dim_ = static_cast<int>(n);
  p.g_ = quartic;
  p.nu_ = quadratic;
  p.h_ = linear;
  return p;
}

PotentialDescriptor PotentialDescriptor::phi4_site_sum(double g, double nu, const Vector& h) {
  const auto n = h.size();
  auto p = polynomial(Vector::Constant(n, g), Vector::Constant(n, nu), h);
  p.form_ = PotentialForm::Phi4SiteSum;
  return p;
}

void PotentialDescriptor::evaluate(const Vector& x, double* value, Vector* grad,
                                   Matrix* hess) const {
  switch (form_) {
    case PotentialForm::Zero:
      if (value) *value = 0.0;
      if (grad) *grad = Vector::Zero(dim_);
      if (hess) *hess = Matrix::Zero(dim_, dim_);
      return;
    case PotentialForm::Quadratic: {
      const Vector bx = b_ * x;
      if (value) *value = 0.5 * x.dot(bx);
      if (grad) *grad = bx;
      if (hess) *hess = b_;
      return;
    }
    case PotentialForm::Polynomial:
    case PotentialForm::Phi4SiteSum: {
      if (value) {
        double v = 0.0;
        for (int i = 0; i < dim_; ++i) {
          const double xi = x(i);
          const double x2 = xi * xi;
          v += 0.25 * g_(i) * x2 * x2 + 0.5 * nu_(i) * x2 - h_(i) * xi;
        }
        *value = v;
      }
      if (grad) {
        grad->resize(dim_);
        for (int i = 0; i < dim_; ++i) {
          const double xi = x(i);
          (*grad)(i) = g_(i) * xi * xi * xi + nu_(i) * xi - h_(i);
        }
      }
      if (hess) {
        *hess = Matrix::Zero(dim_, dim_);
        for (int i = 0; i < dim_; ++i) (*hess)(i, i) = 3.0 * g_(i) * x(i) * x(i) + nu_(i);
      }
      return;
    }
  }
}

double PotentialDescriptor::value(const Vector& x) const {
  double v = 0.0;
  evaluate(x, &v, nullptr, nullptr);
  return v;
}

Vector PotentialDescriptor::gradient(const Vector& x) const {
  Vector g;
  evaluate(x, nullptr, &g, nullptr);
  return g;
}

Matrix PotentialDescriptor::hessian(const Vector& x) const {
  Matrix h;
  evaluate(x, nullptr, nullptr, &h);
  return h;
}

double PotentialDescriptor::lower_bound() const {
  switch (form_) {
    case PotentialForm::Zero:
      return 0.0;
    case PotentialForm::Quadratic:
      return min_eigenvalue(b_) >= -1e-14 ? 0.0 : -std::numeric_limits<double>::infinity();
    case PotentialForm::Polynomial:
    case PotentialForm::Phi4SiteSum: {
      double total = 0.0;
      for (int i = 0; i < dim_; ++i) total += quartic_minimum(g_(i), nu_(i), h_(i));
      return total;
    }
  }
  return -std::numeric_limits<double>::infinity();
}

TiltedMeasure tilted_measure(const ScalarField& u, const Matrix& c, const Vector& x, int order,
                             bool with_gradients, bool with_hessians) {
  const int d = u.dim();
  if (c.rows() != d || c.cols() != d || x.size() != d) {
    throw DomainError("tilted measure: dimension mismatch between field, covariance and point");
  }
  const auto reduced = reduce_covariance(c);
  const int r = reduced.rank;
  const Matrix& b = reduced.basis;
  TiltedMeasure out;

  if (r == 0) {
    double v = 0.0;
    Vector g;
    Matrix h;
    u.evaluate(x, &v, with_gradients ? &g : nullptr, with_hessians ? &h : nullptr);
    out.points = x;
    out.probabilities = Vector::Ones(1);
    out.log_mass = -v;
    if (with_gradients) out.gradients = g;
    if (with_hessians) out.hessians = {h};
    return out;
  }

  // Mode of  ell(z) = -U(x + B z) - |z|^2 / 2  by damped Newton.
  auto ell = [&](const Vector& z) { return -u.value(x + b * z) - 0.5 * z.squaredNorm(); };
  Vector z = Vector::Zero(r);
  double f = ell(z);
  Matrix neg_hess = Matrix::Identity(r, r);
  bool curvature_ok = false;
  if (std::isfinite(f)) {
    for (int it = 0; it < 100; ++it) {
      double v = 0.0;
      Vector gu;
      Matrix hu;
      u.evaluate(x + b * z, &v, &gu, &hu);
      const Vector grad = -b.transpose() * gu - z;
      neg_hess = b.transpose() * hu * b + Matrix::Identity(r, r);
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + z.lpNorm<Eigen::Infinity>())) break;
      Eigen::LLT<Matrix> llt(neg_hess);
      Vector step = llt.info() == Eigen::Success ? Vector(llt.solve(grad)) : grad;
      double alpha = 1.0;
      double trial = ell(z + step);
      int halvings = 0;
      while (!(trial >= f) && halvings < 60) {
        alpha *= 0.5;
        trial = ell(z + alpha * step);
        ++halvings;
      }
      if (halvings == 60) break;
      z += alpha * step;
      f = trial;
      if ((alpha * step).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
        break;
      }
    }
    Matrix hu;
    u.evaluate(x + b * z, nullptr, nullptr, &hu);
    neg_hess = symmetrize(b.transpose() * hu * b + Matrix::Identity(r, r));
    curvature_ok = neg_hess.allFinite() && min_eigenvalue(neg_hess) > 1e-8;
  }

  // Width along each principal direction of the Laplace fit: the distance
  // at which ell falls 2 below its value at the mode (two standard
  // deviations for a Gaussian), found by outward marching and bisection.
  // Unlike the curvature at the mode, this stays finite when the density is
  // flat there and confined by higher-order terms.
  Matrix directions = Matrix::Identity(r, r);
  if (curvature_ok) {
    directions = symmetric_eigen(neg_hess).vectors;
  } else {
    z.setZero();
    f = ell(z);
  }
  Vector widths = Vector::Ones(r);
  if (std::isfinite(f)) {
    auto reach = [&](const Vector& dir) {
      double inner = 0.0;
      double outer = 1e-2;
      while (outer < 1e3 && ell(z + outer * dir) > f - 2.0) {
        inner = outer;
        outer *= 1.5;
      }
      for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (inner + outer);
        (ell(z + mid * dir) > f - 2.0 ? inner : outer) = mid;
      }
      return 0.5 * (inner + outer);
    };
    for (int j = 0; j < r; ++j) {
      const Vector dir = directions.col(j);
      widths(j) = 0.25 * (reach(dir) + reach(-dir));
    }
  }
  Matrix scale = directions * widths.asDiagonal() * directions.transpose();
  double log_det_scale = widths.array().log().sum();

  const auto rule = gauss_hermite_rule(order, r);
  const auto k = rule.size();
  const auto probe = gauss_hermite_rule(std::max(10, order / 2), r);

  // Log weights of the probe rule placed at centre z with the given scale.
  auto place = [&](const Vector& centre, const Matrix& sc, double log_det, Matrix* zs) {
    const auto kp = probe.size();
    Vector lw(kp);
    zs->resize(r, kp);
    for (Eigen::Index i = 0; i < kp; ++i) {
      const Vector node = probe.nodes.col(i);
      const Vector zi = centre + sc * node;
      zs->col(i) = zi;
      lw(i) = probe.log_weights(i) + log_det - 0.5 * zi.squaredNorm() + 0.5 * node.squaredNorm() -
              u.value(x + b * zi);
    }
    return lw;
  };

  // The Laplace fit misplaces the rule when the tilted density is flat at
  // its mode or has several modes. Two moment-matching passes move the rule
  // to the fitted mean and covariance; they are kept only while the
  // covariance stays nondegenerate.
  for (int pass = 0; pass < 2; ++pass) {
    Matrix zs;
    const Vector lw = place(z, scale, log_det_scale, &zs);
    const double l = log_sum_exp(lw);
    if (!std::isfinite(l)) break;
    const Vector p = (lw.array() - l).exp();
    const Vector mean = zs * p;
    const Matrix centred = zs.colwise() - mean;
    const Matrix cov = symmetrize(centred * p.asDiagonal() * centred.transpose());
    if (!cov.allFinite()) break;
    const auto eig = symmetric_eigen(cov);
    if (!(eig.values.minCoeff() > 1e-10)) break;
    z = mean;
    scale = eig.vectors * eig.values.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
    log_det_scale = 0.5 * eig.values.array().log().sum();
  }

  out.points.resize(d, k);
  Vector logw(k);
  if (with_gradients) out.gradients.resize(d, k);
  if (with_hessians) out.hessians.resize(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const Vector node = rule.nodes.col(i);
    const Vector zi = z + scale * node;
    const Vector yi = x + b * zi;
    double v = 0.0;
    Vector g;
    Matrix h;
    u.evaluate(yi, &v, with_gradients ? &g : nullptr, with_hessians ? &h : nullptr);
    out.points.col(i) = yi;
    logw(i) = rule.log_weights(i) + log_det_scale - 0.5 * zi.squaredNorm() +
              0.5 * node.squaredNorm() - v;
    if (with_gradients) out.gradients.col(i) = g;
    if (with_hessians) out.hessians[static_cast<std::size_t>(i)] = std::move(h);
  }
  const double lse = log_sum_exp(logw);
  if (!std::isfinite(lse)) {
    std::ostringstream os;
    os << "quadrature underflow: all tilted weights vanish (max exponent " << logw.maxCoeff()
       << "); increase the quadrature order or shrink the evaluation box";
    throw ConvergenceError(os.str());
  }
  out.log_mass = lse;
  out.probabilities = (logw.array() - lse).exp();
  return out;
}

namespace {

bool quadratic_closed_form(const PotentialDescriptor& v0, const Matrix& c, const Vector& x,
                           RenormalizedSample& out) {
  const int d = v0.dim();
  if (v0.form() == PotentialForm::Zero) {
    out.value = 0.0;
    out.grad = Vector::Zero(d);
    out.hess = Matrix::Zero(d, d);
    return true;
  }
  if (v0.form() != PotentialForm::Quadratic) return false;
  // B (I + C B)^{-1} = B - B S (I + S B S)^{-1} S B  with S = C^{1/2}.
  const Matrix& bm = v0.quadratic_matrix();
  const Matrix s = psd_sqrt(c);
  const Matrix m = symmetrize(Matrix::Identity(d, d) + s * bm * s);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw DomainError("exp(-V_0) is not integrable against gamma_C (I + C B not positive)");
  }
  const Matrix k = symmetrize(bm - bm * s * llt.solve(s * bm));
  const Matrix lmat = llt.matrixL();
  out.value = 0.5 * x.dot(k * x) + lmat.diagonal().array().log().sum();
  out.grad = k * x;
  out.hess = k;
  return true;
}

RenormalizedSample from_tilted(const TiltedMeasure& m, int d) {
  RenormalizedSample out;
  out.value = -m.log_mass;
  out.grad = m.gradients * m.probabilities;
  out.hess = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < m.probabilities.size(); ++k) {
    const Vector dev = m.gradients.col(k) - out.grad;
    out.hess += m.probabilities(k) * (m.hessians[static_cast<std::size_t>(k)] -
                                      dev * dev.transpose());
  }
  out.hess = symmetrize(out.hess);
  return out;
}

}  // namespace

double renormalized_value(const PotentialDescriptor& v0, const Matrix& c, const Vector& x,
                          const QuadratureRule& q) {
  RenormalizedSample closed;
  if (quadratic_closed_form(v0, c, x, closed)) return closed.value;
  return -tilted_measure(v0, c, x, q.order, false, false).log_mass;
}

RenormalizedSample renormalized_derivatives(const PotentialDescriptor& v0, const Matrix& c,
                                            const Vector& x, const QuadratureRule& q) {
  RenormalizedSample out;
  if (quadratic_closed_form(v0, c, x, out)) return out;
  return from_tilted(tilted_measure(v0, c, x, q.order, true, true), v0.dim());
}

RenormalizedPotential::RenormalizedPotential(const PotentialDescriptor& v0, Matrix c, int order)
    : v0_(v0), c_(std::move(c)), rule_{order, v0.dim(), Matrix(), Vector()} {}

double RenormalizedPotential::value(const Vector& x) const {
  return renormalized_value(v0_, c_, x, rule_);
}

void RenormalizedPotential::evaluate(const Vector& x, double* value, Vector* grad,
                                     Matrix* hess) const {
  if (!grad && !hess) {
    if (value) *value = renormalized_value(v0_, c_, x, rule_);
    return;
  }
  auto s = renormalized_derivatives(v0_, c_, x, rule_);
  if (value) *value = s.value;
  if (grad) *grad = std::move(s.grad);
  if (hess) *hess = std::move(s.hess);
}

std::vector<Vector> default_sample_set(const Vector& lo, const Vector& hi, std::uint64_t seed,
                                       int per_axis, int random_points) {
  const auto d = lo.size();
  if (hi.size() != d || d < 1) throw DomainError("sample box dimension mismatch");
  std::vector<Vector> out;
  Eigen::Index total = 1;
  for (Eigen::Index k = 0; k < d; ++k) total *= per_axis;
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    Vector p(d);
    Eigen::Index rem = idx;
    for (Eigen::Index k = d - 1; k >= 0; --k) {
      const auto i = rem % per_axis;
      rem /= per_axis;
      p(k) = per_axis == 1 ? 0.5 * (lo(k) + hi(k))
                           : lo(k) + (hi(k) - lo(k)) * static_cast<double>(i) / (per_axis - 1);
    }
    out.push_back(p);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < random_points; ++i) {
    Vector p(d);
    for (Eigen::Index k = 0; k < d; ++k) p(k) = lo(k) + (hi(k) - lo(k)) * unit(rng);
    out.push_back(p);
  }
  return out;
}

}  // namespace rgflow

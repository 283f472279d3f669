#pragma once

#include "rgflow/linalg.hpp"
#include "rgflow/quadrature.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rgflow {

/// A smooth real function on R^d with value, gradient and Hessian.
class ScalarField {
 public:
  virtual ~ScalarField() = default;
  virtual int dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  /// Fills any non-null output.
  virtual void evaluate(const Vector& x, double* value, Vector* grad, Matrix* hess) const = 0;
};

enum class PotentialForm { Zero, Quadratic, Polynomial, Phi4SiteSum };

/// Base potential V_0.
///   zero          V_0 = 0
///   quadratic     V_0(x) = 1/2 <x, B x>
///   polynomial    V_0(x) = sum_i g_i x_i^4 / 4 + nu_i x_i^2 / 2 - h_i x_i
///   phi4-site-sum the polynomial form with a common g and nu on every site
class PotentialDescriptor final : public ScalarField {
 public:
  static PotentialDescriptor zero(int dim);
  static PotentialDescriptor quadratic(const Matrix& b);
  static PotentialDescriptor polynomial(const Vector& quartic, const Vector& quadratic,
                                        const Vector& linear);
  static PotentialDescriptor phi4_site_sum(double g, double nu, const Vector& h);

  PotentialForm form() const { return form_; }
  int dim() const override { return dim_; }
  const Matrix& quadratic_matrix() const { return b_; }
  const Vector& quartic() const { return g_; }
  const Vector& mass() const { return nu_; }
  const Vector& field() const { return h_; }

  double value(const Vector& x) const override;
  void evaluate(const Vector& x, double* value, Vector* grad, Matrix* hess) const override;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

  /// inf V_0 over R^d; -inf when V_0 is unbounded below.
  double lower_bound() const;

 private:
  PotentialForm form_ = PotentialForm::Zero;
  int dim_ = 0;
  Matrix b_;
  Vector g_;
  Vector nu_;
  Vector h_;
};

/// Quadrature representation of the tilted measure
///   rho_x(dz) ~ exp(-U(x + z)) gamma_C(dz)
/// at a single point x. Nodes are placed by adaptive Gauss–Hermite: the rule
/// is recentred at the mode of the tilted density and rescaled by its local
/// curvature, which keeps it accurate when exp(-U) shifts the mass far into
/// the tail of gamma_C. All sums run in log space with max-shift.
struct TiltedMeasure {
  Matrix points;        // d x K, the shifted nodes y_k = x + z_k
  Vector probabilities; // K, normalized
  double log_mass = 0;  // log E_{gamma_C}[exp(-U(x + Z))]
  Matrix gradients;     // d x K, grad U(y_k) (when requested)
  std::vector<Matrix> hessians;  // Hess U(y_k) (when requested)
};

/// When C vanishes the measure collapses to a single node at x with mass
/// exp(-U(x)). Eigen-directions of C below 1e-13 * max(1, |C|) are dropped
/// and the Gaussian is treated as degenerate on the range of C.
TiltedMeasure tilted_measure(const ScalarField& u, const Matrix& c, const Vector& x, int order,
                             bool with_gradients, bool with_hessians);

struct RenormalizedSample {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

/// V_t(x) = -log E_{Z ~ gamma_C}[exp(-V_0(x + Z))].
double renormalized_value(const PotentialDescriptor& v0, const Matrix& c, const Vector& x,
                          const QuadratureRule& q);

/// grad V_t = E_rho[grad V_0],  Hess V_t = E_rho[Hess V_0] - Cov_rho(grad V_0).
RenormalizedSample renormalized_derivatives(const PotentialDescriptor& v0, const Matrix& c,
                                            const Vector& x, const QuadratureRule& q);

/// V_t as a ScalarField, for use as the weight of later convolutions.
class RenormalizedPotential final : public ScalarField {
 public:
  RenormalizedPotential(const PotentialDescriptor& v0, Matrix c, int order);
  int dim() const override { return v0_.dim(); }
  double value(const Vector& x) const override;
  void evaluate(const Vector& x, double* value, Vector* grad, Matrix* hess) const override;
  const Matrix& covariance() const { return c_; }

 private:
  PotentialDescriptor v0_;
  Matrix c_;
  QuadratureRule rule_;
};

/// Sample set used wherever a statement quantifies over all x: a 17^d tensor
/// grid on [lo, hi] plus `random_points` seeded uniform points in the box.
std::vector<Vector> default_sample_set(const Vector& lo, const Vector& hi, std::uint64_t seed,
                                       int per_axis = 17, int random_points = 100);

}  // namespace rgflow

#include "rgflow/oracle.hpp"
#include "rgflow/phi4.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rgflow;

namespace {

Phi4Model single_site(double a, double g, double nu) {
  Phi4Model m;
  m.a = Matrix::Constant(1, 1, a);
  m.g = g;
  m.nu = nu;
  m.h = Vector::Zero(1);
  return m;
}

Phi4Model chain(int n, double g) {
  Phi4Model m;
  m.a = nearest_neighbor_matrix(n);
  m.g = g;
  m.nu = 0.0;
  m.h = Vector::Zero(n);
  return m;
}

}  // namespace

TEST_CASE("nearest-neighbour matrix") {
  CHECK(nearest_neighbor_matrix(1)(0, 0) == 2.0);
  const Matrix a = nearest_neighbor_matrix(3);
  CHECK(a(0, 0) == 2.0);
  CHECK(a(0, 1) == -1.0);
  CHECK(a(0, 2) == 0.0);
  CHECK((a - a.transpose()).norm() == 0.0);
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(single_site(1.0, -1.0, 0.0).validate(), DomainError);
  CHECK_THROWS_AS(single_site(1.0, 0.0, -1.0).validate(), DomainError);
  CHECK_NOTHROW(single_site(1.0, 0.0, -0.5).validate());
  CHECK_NOTHROW(single_site(1.0, 1.0, -3.0).validate());
}

TEST_CASE("Gaussian susceptibilities") {
  CHECK(susceptibility(single_site(1.0, 0.0, 0.0), 1.0).value == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(susceptibility(single_site(2.0, 0.0, 0.0), 0.5).value == doctest::Approx(0.25).epsilon(1e-12));
  Phi4Model m = chain(2, 0.0);
  CHECK(susceptibility(m, 1.0).value == doctest::Approx(0.5).epsilon(1e-12));
  // (A + I)^{-1} = [[3, 1], [1, 3]] / 8
  const auto s = tilted_covariance(m, 1.0, (Vector(2) << 0.4, -1.0).finished());
  CHECK(s.covariance(0, 0) == doctest::Approx(3.0 / 8).epsilon(1e-12));
  CHECK(s.covariance(0, 1) == doctest::Approx(1.0 / 8).epsilon(1e-12));
  CHECK_THROWS_AS(susceptibility(m, 0.0), DomainError);
}

TEST_CASE("quartic single-site susceptibility against the 1D oracle and MCMC") {
  const auto model = single_site(1.0, 1.0, 0.0);
  const auto ref =
      oracle::moments_1d([](double y) { return y * y + 0.25 * y * y * y * y; }, -12.0, 12.0);
  const auto q = susceptibility(model, 1.0);
  CHECK(q.method == MomentMethod::Quadrature);
  CHECK(q.converged);
  CHECK(std::abs(q.value - ref.variance) < 1e-8);

  // Sigma at phi = 0 with h = 0 is the second moment.
  const auto s = tilted_covariance(model, 1.0, Vector::Zero(1));
  CHECK(std::abs(s.mean(0)) < 1e-12);
  CHECK(std::abs(s.covariance(0, 0) - ref.second) < 1e-8);

  Phi4Options opt;
  opt.force_mcmc = true;
  opt.seed = 2024;
  opt.sweeps = 100000;
  const auto mc = susceptibility(model, 1.0, opt);
  CHECK(mc.method == MomentMethod::Mcmc);
  CHECK(mc.seed == 2024);
  CHECK(mc.std_error > 0.0);
  CHECK(std::abs(mc.value - ref.variance) <= 3.0 * mc.std_error);
}

TEST_CASE("two-site tilted covariance against a tensor quadrature oracle") {
  const auto model = chain(2, 1.0);
  const double t = 1.0;
  const Vector phi = (Vector(2) << 0.3, -0.2).finished();
  const Matrix prec = model.a + Matrix::Identity(2, 2) / t;  // C_t^{-1}
  const Vector b = prec * phi;
  auto u = [&](double x, double y) {
    return 0.5 * (prec(0, 0) * x * x + 2 * prec(0, 1) * x * y + prec(1, 1) * y * y) +
           0.25 * (x * x * x * x + y * y * y * y) - b(0) * x - b(1) * y;
  };
  const auto ref = oracle::covariance_2d(u, -8.0, 8.0, 801);
  const auto s = tilted_covariance(model, t, phi);
  CHECK(std::abs(s.covariance(0, 0) - ref[0]) < 1e-6);
  CHECK(std::abs(s.covariance(0, 1) - ref[1]) < 1e-6);
  CHECK(std::abs(s.covariance(1, 1) - ref[2]) < 1e-6);
}

TEST_CASE("closed-form schedule values") {
  CHECK(phi4_lambda_prime(1.0, 0.5) == doctest::Approx(0.5));
  CHECK(phi4_alpha_formula(Matrix::Constant(1, 1, 1.0), 1.0, 0.5) == doctest::Approx(2.5));

  // Exact alpha' for g = 0 stays below the formula.
  const auto model = single_site(1.0, 0.0, 0.0);
  const auto sch = model.schedule();
  const Box box = curvature_sample_box(sch, 1.0);
  const auto exact = alpha_prime(sch, model.potential(), 1.0, default_sample_set(box.lo, box.hi, 3));
  CHECK(exact.value == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(exact.value <= 2.5);

  // alpha_1 = int_0^1 (1 / (t + 1) + t + 1) dt = ln 2 + 3/2 with Sigma = C_t.
  std::vector<double> t, lam, alpha;
  for (int i = 0; i <= 4000; ++i) {
    const double ti = i / 4000.0;
    t.push_back(ti);
    lam.push_back(0.0);
    alpha.push_back(i == 0 ? 2.0 : phi4_alpha_formula(model.a, ti, ti / (ti + 1.0)));
  }
  const auto curv = integrate_schedules(t, lam, alpha);
  CHECK(curv.alpha_at(1.0) == doctest::Approx(std::log(2.0) + 1.5).epsilon(1e-7));
}

TEST_CASE("Hessian identity") {
  CHECK(hessian_identity_check(single_site(1.0, 0.0, 0.0), 1.0, {Vector::Constant(1, 0.4)})
            .max_relative_error < 1e-9);
  CHECK(hessian_identity_check(single_site(1.0, 1.0, 0.0), 1.0, {Vector::Zero(1)}).max_relative_error <
        1e-5);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  std::vector<Vector> phis;
  for (int i = 0; i < 4; ++i) phis.push_back((Vector(2) << n01(rng), n01(rng)).finished());
  CHECK(hessian_identity_check(chain(2, 1.0), 0.5, phis).max_relative_error < 1e-5);
}

TEST_CASE("single-site criterion certification") {
  const auto model = single_site(2.0, 1.0, 0.0);
  const auto sch = model.schedule();
  CurvatureOptions sampling;
  sampling.order = 80;
  const auto pts = phi4_schedules(model, {0.5, 1.0, 2.0}, {}, sampling);
  REQUIRE(pts.size() == 3);
  for (const auto& p : pts) {
    const Box box = curvature_sample_box(sch, p.t);
    const auto m = multiscale_margin(sch, model.potential(), p.t,
                                     default_sample_set(box.lo, box.hi, 11), sampling);
    CHECK(m.value >= p.lambda_prime - 1e-6);
    CHECK(p.lambda_prime == doctest::Approx(1.0 / p.t - p.chi / (p.t * p.t)));
  }
}

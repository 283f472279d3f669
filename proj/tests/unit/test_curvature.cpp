#include "rgflow/curvature.hpp"

#include <doctest.h>

#include <cmath>

using namespace rgflow;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector point(double v) { return Vector::Constant(1, v); }

std::vector<Vector> samples_at(const CovarianceSchedule& sch, double t) {
  const Box box = curvature_sample_box(sch, t);
  return default_sample_set(box.lo, box.hi, 1);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * i / (n - 1));
  return out;
}

// Gaussian chain: lambda' = 1/2, alpha' = 1.
CurvatureSchedule gaussian_chain(const std::vector<double>& t) {
  return integrate_schedules(t, std::vector<double>(t.size(), 0.5),
                             std::vector<double>(t.size(), 1.0));
}

}  // namespace

TEST_CASE("pointwise curvature restricted to the range of C'") {
  CovarianceSample cov;
  cov.c = Matrix::Zero(2, 2);
  cov.cprime = Matrix::Zero(2, 2);
  cov.cprime(0, 0) = 1.0;
  cov.csecond = Matrix::Zero(2, 2);
  cov.csecond(0, 0) = -1.0;
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 0.3;
  h(1, 1) = -7.0;  // invisible outside range(C')
  CHECK(pointwise_curvature(cov, h) == doctest::Approx(0.8).epsilon(1e-14));
  cov.cprime.setZero();
  CHECK_THROWS_AS(pointwise_curvature(cov, h), DomainError);
}

TEST_CASE("heat kernel without potential has lambda' = 1/2 and alpha' = 1") {
  const auto sch = CovarianceSchedule::heat_kernel(scalar(1.0));
  const auto v0 = PotentialDescriptor::zero(1);
  for (double t : {0.0, 0.5, 2.0}) {
    const auto s = samples_at(sch, t);
    CHECK(std::abs(multiscale_margin(sch, v0, t, s).value - 0.5) < 1e-12);
    CHECK(std::abs(alpha_prime(sch, v0, t, s).value - 1.0) < 1e-12);
  }
}

TEST_CASE("Pauli-Villars without potential") {
  const auto sch = CovarianceSchedule::pauli_villars(scalar(1.0));
  const auto v0 = PotentialDescriptor::zero(1);
  for (double t : {0.5, 1.0, 2.0}) {
    const auto s = samples_at(sch, t);
    // a / (t a + 1) for both with a = 1
    CHECK(std::abs(multiscale_margin(sch, v0, t, s).value - 1.0 / (t + 1.0)) < 1e-12);
    CHECK(std::abs(alpha_prime(sch, v0, t, s).value - 1.0 / (t + 1.0)) < 1e-12);
  }
  CHECK_THROWS_AS(multiscale_margin(sch, v0, 1.0, {}), DomainError);
}

TEST_CASE("integrated schedules") {
  const auto g = gaussian_chain(linspace(0.0, 2.0, 9));
  CHECK(g.lambda_at(2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.alpha_at(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(g.index_of(0.3), DomainError);
  CHECK_THROWS_AS(integrate_schedules({0.0, 1.0, 0.5}, {1, 1, 1}, {1, 1, 1}), DomainError);

  const auto sch = CovarianceSchedule::pauli_villars(scalar(1.0));
  CurvatureOptions opt;
  opt.subdivisions = 64;  // trapezoid error below 2e-7
  const auto c = curvature_schedule(sch, PotentialDescriptor::zero(1), linspace(0.0, 1.0, 11), opt);
  CHECK(c.lambda_at(1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(c.refinement_ok);
  CHECK_THROWS_AS(curvature_schedule(sch, PotentialDescriptor::zero(1), {0.0, 1.0, 0.5}), DomainError);
}

TEST_CASE("theorem margins vanish on the Gaussian chain") {
  const auto times = linspace(0.0, 2.0, 5);
  const auto curv = gaussian_chain(times);
  const auto m = theorem_margin(times, std::vector<double>(times.size(), 1.0), curv);
  CHECK(m.size() == 10);
  for (const auto& p : m) {
    CHECK(p.s < p.t);
    CHECK(std::abs(p.margin) < 1e-14);
  }
  CHECK(ordered_pairs(5).size() == 10);
  CHECK(ordered_pairs(1).empty());
  CHECK_THROWS_AS(theorem_margin(times, {1.0, 1.0}, curv), DomainError);
}

TEST_CASE("higher eigenvalue margins scale like the first") {
  const auto times = linspace(0.0, 2.0, 5);
  const auto curv = gaussian_chain(times);
  // OU spectrum mu_k = k at every time on the weighted chain.
  std::vector<Vector> eig(times.size(), (Vector(4) << 0.0, 1.0, 2.0, 3.0).finished());
  const auto m = higher_eigenvalue_margin(times, eig, curv);
  CHECK(m.size() == 30);
  for (const auto& p : m) CHECK(std::abs(p.margin) < 1e-14);

  // k = 1 against C_P = 1 / mu_1 with a time-varying spectrum.
  std::vector<Vector> vary;
  std::vector<double> cp;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double mu1 = 1.0 + 0.1 * static_cast<double>(i * i);
    vary.push_back((Vector(2) << 0.0, mu1).finished());
    cp.push_back(1.0 / mu1);
  }
  const auto a = higher_eigenvalue_margin(times, vary, curv);
  const auto b = theorem_margin(times, cp, curv);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].margin == doctest::Approx(b[i].margin).epsilon(1e-14));
}

TEST_CASE("Poincare upper bound on the Gaussian chain") {
  const auto curv = gaussian_chain(linspace(0.0, 20.0, 2001));
  const auto b0 = poincare_upper_bound(curv, 1.0, 0.0);
  CHECK(b0.tail_model == "exponential");
  CHECK(b0.unweighted == doctest::Approx(1.0).epsilon(1e-4));
  const auto b1 = poincare_upper_bound(curv, std::exp(-1.0), 1.0);
  CHECK(b1.weighted == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(b1.unweighted < b0.unweighted);

  const auto flat = integrate_schedules({0.0, 1.0, 2.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
  CHECK_THROWS_WITH_AS(poincare_upper_bound(flat, 1.0, 0.0), doctest::Contains("bound divergent"),
                       DomainError);
}

TEST_CASE("intertwining is an equality for linear F on the Gaussian chain") {
  const auto sch = CovarianceSchedule::heat_kernel(scalar(1.0));
  const PolchinskiSemigroup p(sch, PotentialDescriptor::zero(1));
  const auto curv = gaussian_chain(linspace(0.0, 2.0, 9));
  for (double t : {0.5, 1.0, 2.0}) {
    const auto r = intertwining_check(p, linear_function(point(1.0)), t, curv);
    CHECK(std::abs(r.max_violation) < 1e-12);
    CHECK(r.max_lhs == doctest::Approx(std::exp(-t)).epsilon(1e-12));
    const auto c = intertwining_check(p, constant_function(1, 2.0), t, curv);
    CHECK(c.max_lhs == 0.0);
    CHECK(c.max_violation <= 0.0);
  }
}

TEST_CASE("Lemma check on a flat Rayleigh trace") {
  const auto times = linspace(0.0, 2.0, 5);
  const auto r = lemma_check(times, std::vector<double>(5, 1.0), gaussian_chain(times));
  CHECK(std::abs(r.max_pair_excess) < 1e-14);
  CHECK(std::abs(r.max_rate_excess) < 1e-14);
}

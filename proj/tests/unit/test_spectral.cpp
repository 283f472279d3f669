#include "rgflow/oracle.hpp"
#include "rgflow/spectral.hpp"

#include <doctest.h>

#include <cmath>

using namespace rgflow;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector point(double v) { return Vector::Constant(1, v); }

// nu_t of the Gaussian chain V_0 = 0, C_inf = 1, heat kernel.
FlowMeasure gaussian_flow(double t, int nodes) {
  const auto sch = CovarianceSchedule::heat_kernel(scalar(1.0));
  return FlowMeasure(sch, PotentialDescriptor::zero(1), t, Grid(default_flow_box(sch, t), {nodes}));
}

FlowMeasure double_well_flow(double t, int nodes) {
  const auto sch = CovarianceSchedule::pauli_villars(scalar(1.0));
  const auto v0 = PotentialDescriptor::phi4_site_sum(1.0, -1.0, Vector::Zero(1));
  return FlowMeasure(sch, v0, t, Grid(default_flow_box(sch, t), {nodes}));
}

}  // namespace

TEST_CASE("Ornstein-Uhlenbeck spectrum") {
  const auto nu = gaussian_flow(0.0, 1025);
  const auto gen = build_generator(nu, nu.covariance().cprime, Drift::ScriptL);
  const auto r = spectrum(gen, 4);
  CHECK(std::abs(r.eigenvalues(0)) < 1e-10);
  for (int k = 1; k <= 4; ++k) {
    CHECK(std::abs(r.eigenvalues(k) - k) / k < 3e-3);
  }
  CHECK(r.converged);
  CHECK(r.poincare_constant == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("Ornstein-Uhlenbeck spectrum against the Sturm-Liouville oracle") {
  const auto nu = gaussian_flow(0.0, 513);
  const auto gen = build_generator(nu, nu.covariance().cprime, Drift::ScriptL);
  const auto r = spectrum(gen, 3);
  const double half = nu.grid().box().hi(0);
  const auto ref = oracle::sturm_liouville_richardson([](double x) { return -0.5 * x * x; }, -half,
                                                      half, 1.0, 1025, 4);
  for (int k = 1; k <= 3; ++k) CHECK(std::abs(r.eigenvalues(k) - ref[k]) / ref[k] < 1e-3);
}

TEST_CASE("Gaussian flow has weighted Poincare constant one at every time") {
  for (double t : {0.0, 0.5, 1.0, 2.0}) {
    const auto nu = gaussian_flow(t, 513);
    const auto weighted = spectrum(build_generator(nu, nu.covariance().cprime, Drift::ScriptL), 1);
    CHECK(weighted.poincare_constant == doctest::Approx(1.0).epsilon(1e-3));
    // Unweighted: the variance e^{-t}.
    const auto plain = spectrum(build_generator(nu, Matrix::Identity(1, 1), Drift::ScriptL), 1);
    CHECK(plain.poincare_constant == doctest::Approx(std::exp(-t)).epsilon(1e-3));
  }
}

TEST_CASE("double well Poincare constant against a fine Sturm-Liouville oracle") {
  // At t = 0 the density is exp(-y^4 / 4) and the mobility is C_0' = 1.
  const auto nu = double_well_flow(0.0, 513);
  const auto r = spectrum(build_generator(nu, nu.covariance().cprime, Drift::ScriptL), 1);
  const double half = nu.grid().box().hi(0);
  const auto ref = oracle::sturm_liouville_eigenvalues(
      [](double y) { return -0.25 * y * y * y * y; }, -half, half, 1.0, 4097, 2);
  CHECK(std::abs(r.poincare_constant * ref[1] - 1.0) < 5e-3);
}

TEST_CASE("generator annihilates constants") {
  const auto nu = double_well_flow(0.7, 257);
  for (auto d : {Drift::ScriptL, Drift::L, Drift::Lambda}) {
    const auto gen = build_generator(nu, nu.covariance().cprime, d, false);
    const Vector one = Vector::Constant(nu.grid().size(), 2.5);
    CHECK(gen.apply(one).cwiseAbs().maxCoeff() < 1e-10);
    const auto fd = generator_fd(nu, nu.covariance().cprime, d, sample_on_grid(nu.grid(), [](const Vector&) { return 2.5; }));
    CHECK(fd.values.cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("script-L minus L is the extra drift and half the Laplacian") {
  const double t = 0.5;
  const auto nu = double_well_flow(t, 401);
  const double m = nu.covariance().cprime(0, 0);
  const double g = nu.remaining_inverse()(0, 0);
  const auto phi = sample_on_grid(nu.grid(), [](const Vector& y) { return std::sin(y(0)); });
  const auto a = generator_fd(nu, nu.covariance().cprime, Drift::ScriptL, phi);
  const auto b = generator_fd(nu, nu.covariance().cprime, Drift::L, phi);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < nu.grid().size(); ++i) {
    if (nu.grid().near_boundary(i, 8)) continue;
    const double x = nu.grid().node(i)(0);
    const double extra = 0.5 * m * -std::sin(x) - g * x * m * std::cos(x);
    worst = std::max(worst, std::abs(a.values(i) - b.values(i) - extra));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("Rayleigh quotients") {
  const auto nu = gaussian_flow(0.0, 513);
  const auto gen = build_generator(nu, nu.covariance().cprime, Drift::ScriptL);
  const auto r = spectrum(gen, 3);
  CHECK(rayleigh_quotient(gen, r.eigenvectors[1]) == doctest::Approx(r.fine_eigenvalues(1)).epsilon(1e-8));
  GridFunction sum = r.eigenvectors[1];
  sum.values += r.eigenvectors[2].values;
  CHECK(rayleigh_quotient(gen, sum) ==
        doctest::Approx(0.5 * (r.fine_eigenvalues(1) + r.fine_eigenvalues(2))).epsilon(1e-6));
  const auto x = sample_on_grid(nu.grid(), [](const Vector& y) { return y(0); });
  CHECK(rayleigh_quotient(gen, x) == doctest::Approx(1.0).epsilon(1e-3));
  const auto c = sample_on_grid(nu.grid(), [](const Vector&) { return 4.0; });
  CHECK_THROWS_WITH_AS(rayleigh_quotient(gen, c), doctest::Contains("degenerate"), DomainError);
}

TEST_CASE("Gamma_2 of x^2 for Ornstein-Uhlenbeck") {
  const auto nu = gaussian_flow(0.0, 801);
  const auto phi = sample_on_grid(nu.grid(), [](const Vector& y) { return y(0) * y(0); });
  const auto g = gamma_operators(nu, nu.covariance().cprime, Drift::ScriptL, phi);
  for (Eigen::Index i = 0; i < nu.grid().size(); i += 40) {
    if (nu.grid().near_boundary(i, 8)) continue;
    const double x = nu.grid().node(i)(0);
    CHECK(g.gamma.values(i) == doctest::Approx(4 * x * x).epsilon(1e-8).scale(1e-8));
    CHECK(g.gamma2_explicit.values(i) == doctest::Approx(4 + 4 * x * x).epsilon(1e-8));
  }
  CHECK(g.relative_error < 1e-5);
}

TEST_CASE("Gamma_2 of a linear function has no Hessian term") {
  const double t = 0.5;
  const auto nu = gaussian_flow(t, 401);
  const auto phi = sample_on_grid(nu.grid(), [](const Vector& y) { return 2.0 * y(0); });
  const auto g = gamma_operators(nu, nu.covariance().cprime, Drift::ScriptL, phi);
  // G M^2 a^2 with M = e^{-t} and G = e^{t}
  const double expected = std::exp(-t) * 4.0;
  for (Eigen::Index i = 0; i < nu.grid().size(); i += 25) {
    if (nu.grid().near_boundary(i, 8)) continue;
    CHECK(g.gamma2_explicit.values(i) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK(g.relative_error < 1e-5);
}

TEST_CASE("integrated Bochner identity") {
  const auto nu = double_well_flow(0.5, 513);
  const auto phi = sample_on_grid(nu.grid(), [](const Vector& y) { return std::tanh(y(0)) + 0.3 * y(0) * y(0); });
  for (auto d : {Drift::ScriptL, Drift::L}) {
    const auto g = gamma_operators(nu, nu.covariance().cprime, d, phi);
    CHECK(g.mean_gamma2 == doctest::Approx(g.mean_square).epsilon(1e-6));
    CHECK(g.relative_error < 1e-5);
  }
}

TEST_CASE("Rayleigh trace along the Gaussian flow is flat") {
  const auto sch = CovarianceSchedule::heat_kernel(scalar(1.0));
  const PolchinskiSemigroup p(sch, PotentialDescriptor::zero(1));
  const auto trace = rayleigh_flow_trace(p, linear_function(point(1.0)), {0.0, 0.5, 1.0, 2.0});
  REQUIRE(trace.size() == 4);
  for (const auto& pt : trace) {
    CHECK(pt.quotient == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(pt.variance == doctest::Approx(std::exp(-pt.t)).epsilon(1e-6));
  }
  CHECK_THROWS_WITH_AS(rayleigh_flow_trace(p, constant_function(1, 1.0), {0.0, 1.0}),
                       doctest::Contains("degenerate"), DomainError);
}

TEST_CASE("drift names round-trip") {
  for (auto d : {Drift::ScriptL, Drift::L, Drift::Lambda}) CHECK(parse_drift(to_string(d)) == d);
  CHECK(drift_kappa(Drift::L) == 0.5);
  CHECK_THROWS_AS(parse_drift("M"), DomainError);
}

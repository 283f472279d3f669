#include "rgflow/heatflow.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace rgflow;

namespace {

double standard_gaussian(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); }
double uniform(double x) { return std::abs(x) <= 1.0 ? 0.5 : 0.0; }
double bimodal(double x) {
  const double s = 0.5;
  auto n = [s](double m, double y) {
    return std::exp(-0.5 * (y - m) * (y - m) / (s * s)) / (s * std::sqrt(2 * std::numbers::pi));
  };
  return 0.5 * (n(-2.0, x) + n(2.0, x));
}

std::vector<double> s_grid() {
  std::vector<double> s;
  for (int i = 0; i <= 8; ++i) s.push_back(0.25 * i);
  return s;
}

}  // namespace

TEST_CASE("Gaussian input reproduces 1 + s") {
  const auto mu = tabulate_density(-12.0, 12.0, 4801, standard_gaussian);
  CHECK(is_log_concave(mu));
  const auto tr = heatflow_harness(mu, s_grid());
  REQUIRE(tr.poincare.size() == 9);
  for (std::size_t i = 0; i < tr.s.size(); ++i) {
    CHECK(std::abs(tr.poincare[i] / (1.0 + tr.s[i]) - 1.0) < 2e-3);
  }
  CHECK(tr.monotone);
}

TEST_CASE("uniform input gives a nondecreasing trace") {
  const auto mu = tabulate_density(-1.0, 1.0, 2001, uniform);
  CHECK(is_log_concave(mu));
  const auto tr = heatflow_harness(mu, s_grid());
  CHECK(tr.log_concave);
  CHECK(tr.monotone);
  CHECK(tr.max_decrease <= 1e-4);
  // C_P of the uniform law on [-1, 1] is 4 / pi^2.
  CHECK(tr.poincare[0] == doctest::Approx(4.0 / (std::numbers::pi * std::numbers::pi)).epsilon(2e-3));
  CHECK(tr.deconvolution_bound);
}

TEST_CASE("bimodal input still returns a trace") {
  const auto mu = tabulate_density(-6.0, 6.0, 2401, bimodal);
  CHECK_FALSE(is_log_concave(mu));
  const auto tr = heatflow_harness(mu, s_grid());
  CHECK(tr.poincare.size() == 9);
  CHECK_FALSE(tr.log_concave);
  for (double v : tr.poincare) CHECK(v > 0.0);
}

TEST_CASE("unnormalized tables are rescaled") {
  DensityTable mu = tabulate_density(-1.0, 1.0, 201, uniform);
  for (double& v : mu.density) v *= 3.0;
  const auto tr = heatflow_harness(mu, {0.0, 0.5});
  CHECK(tr.renormalized);
  CHECK(tr.input_mass == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("convolved log density") {
  const auto mu = tabulate_density(-12.0, 12.0, 4801, standard_gaussian);
  // gamma * gamma_1 = N(0, 2)
  const double y = 0.7;
  const double expected = -y * y / 4.0 - 0.5 * std::log(4.0 * std::numbers::pi);
  CHECK(log_convolved_density(mu, 1.0, y) == doctest::Approx(expected).epsilon(1e-5));
  CHECK(log_convolved_density(mu, 0.0, 0.0) == doctest::Approx(std::log(standard_gaussian(0.0))).epsilon(1e-12));
  CHECK_THROWS_AS(log_convolved_density(mu, -1.0, 0.0), DomainError);
}

TEST_CASE("density table input") {
  const auto tri = load_density_table(std::string(RGFLOW_TEST_DATA) + "/triangle_density.csv");
  CHECK(tri.x.size() == 41);
  CHECK(tri.density[20] == doctest::Approx(1.0));
  CHECK(is_log_concave(tri));

  std::istringstream uneven("0 1\n0.1 1\n0.3 1\n");
  CHECK_THROWS_WITH_AS(read_density_table(uneven), doctest::Contains("uniform"), DomainError);
  std::istringstream negative("0 1\n1 -1\n");
  CHECK_THROWS_AS(read_density_table(negative), DomainError);
  std::istringstream short_row("0 1\n1\n");
  CHECK_THROWS_AS(read_density_table(short_row), DomainError);
  CHECK_THROWS_WITH_AS(load_density_table("/nonexistent/density.csv"), doctest::Contains("cannot open"),
                       DomainError);
  CHECK_THROWS_AS(heatflow_harness(tri, {0.5, 0.2}), DomainError);
}

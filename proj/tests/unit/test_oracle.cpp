#include "rgflow/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

namespace o = rgflow::oracle;

TEST_CASE("oracle: adaptive Simpson") {
  CHECK(o::adaptive_simpson([](double x) { return std::sin(x); }, 0.0, std::numbers::pi, 1e-13) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(o::adaptive_simpson([](double x) { return std::exp(-x * x); }, -10.0, 10.0, 1e-14) ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("oracle: Gaussian closed form against its own quadrature") {
  const auto g = o::gaussian_renormalized(1.0, 1.0, 1.0);
  CHECK(g.value == doctest::Approx(0.596573590279973).epsilon(1e-14));
  CHECK(g.gradient == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(g.hessian == doctest::Approx(0.5).epsilon(1e-14));
  for (double x : {-1.0, 0.3, 2.0}) {
    const double q = o::renormalized_value_1d([](double y) { return 1.5 * y * y; }, 0.4, x, 0.0);
    CHECK(q == doctest::Approx(o::gaussian_renormalized(3.0, 0.4, x).value).epsilon(1e-12));
  }
}

TEST_CASE("oracle: moments") {
  const auto m = o::moments_1d([](double y) { return 0.5 * (y - 0.3) * (y - 0.3) / 4.0; }, -30, 30);
  CHECK(m.mass == doctest::Approx(std::sqrt(8 * std::numbers::pi)).epsilon(1e-12));
  CHECK(m.mean == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(m.variance == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(m.second == doctest::Approx(4.09).epsilon(1e-12));

  // precision [[2, 0.5], [0.5, 1]] -> covariance [[1, -0.5], [-0.5, 2]] / 1.75
  const auto c = o::covariance_2d(
      [](double x, double y) { return 0.5 * (2 * x * x + x * y + y * y); }, -12, 12, 401);
  CHECK(c[0] == doctest::Approx(1.0 / 1.75).epsilon(1e-10));
  CHECK(c[1] == doctest::Approx(-0.5 / 1.75).epsilon(1e-10));
  CHECK(c[2] == doctest::Approx(2.0 / 1.75).epsilon(1e-10));
}

TEST_CASE("oracle: Sturm-Liouville eigenvalues of Ornstein-Uhlenbeck") {
  const auto raw = o::sturm_liouville_eigenvalues([](double x) { return -0.5 * x * x; }, -10, 10,
                                                  1.0, 1025, 5);
  const auto rich = o::sturm_liouville_richardson([](double x) { return -0.5 * x * x; }, -10, 10,
                                                  1.0, 1025, 5);
  CHECK(std::abs(raw[0]) < 1e-10);
  for (int k = 1; k < 5; ++k) {
    CHECK(std::abs(raw[k] - k) < 1e-2 * k);
    CHECK(std::abs(rich[k] - k) < 1e-6 * k);
  }
  // Mobility scales the spectrum.
  const auto half = o::sturm_liouville_eigenvalues([](double x) { return -0.5 * x * x; }, -10, 10,
                                                   0.5, 1025, 2);
  CHECK(half[1] == doctest::Approx(0.5 * raw[1]).epsilon(1e-12));
}

TEST_CASE("oracle: scalar schedules") {
  const auto h = o::heat_kernel_scalar(2.0, 1.0);
  CHECK(h.c == doctest::Approx(2.0 * (1.0 - std::exp(-0.5))).epsilon(1e-14));
  CHECK(h.cprime == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(h.csecond == doctest::Approx(-0.5 * std::exp(-0.5)).epsilon(1e-14));
  const auto p = o::pauli_villars_scalar(2.0, 1.0);
  CHECK(p.c == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(p.cprime == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(p.csecond == doctest::Approx(-4.0 / 27.0).epsilon(1e-14));
}

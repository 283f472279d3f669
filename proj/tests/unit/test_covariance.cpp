#include "rgflow/covariance.hpp"
#include "rgflow/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace rgflow;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST_CASE("heat kernel scalar at t = ln 2") {
  const auto s = CovarianceSchedule::heat_kernel(scalar(1.0)).eval(std::log(2.0));
  CHECK(s.c(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s.cprime(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(s.csecond(0, 0) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("pauli-villars scalar A = 2 at t = 1") {
  const auto s = make_schedule(ScheduleKind::PauliVillars, scalar(0.5), scalar(2.0)).eval(1.0);
  CHECK(s.c(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(s.cprime(0, 0) == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(s.csecond(0, 0) == doctest::Approx(-4.0 / 27.0).epsilon(1e-14));
}

TEST_CASE("C_0 vanishes and C_t' at t = 1 for diagonal C_inf") {
  const auto sch = CovarianceSchedule::heat_kernel(diag2(1.0, 2.0));
  CHECK(sch.eval(0.0).c.norm() == 0.0);
  const Matrix cp = sch.eval(1.0).cprime;
  CHECK(cp(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(cp(1, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(std::abs(cp(0, 1)) < 1e-15);
}

TEST_CASE("pauli-villars derivative at small t matches the series") {
  const auto sch = make_schedule(ScheduleKind::PauliVillars, scalar(0.5), scalar(2.0));
  const double t = 1e-6;
  const auto s = sch.eval(t);
  CHECK(s.cprime(0, 0) == doctest::Approx(1.0 - 2.0 * 2.0 * t).epsilon(1e-10));
  CHECK(s.c(0, 0) == doctest::Approx(t - 2.0 * t * t).epsilon(1e-10));
}

TEST_CASE("scalar schedules agree with the oracle closed forms") {
  const auto hk = CovarianceSchedule::heat_kernel(scalar(1.7));
  const auto pv = CovarianceSchedule::pauli_villars(scalar(1.0 / 1.3));
  for (double t : {0.0, 0.1, 0.8, 2.5}) {
    const auto a = hk.eval(t);
    const auto o = oracle::heat_kernel_scalar(1.7, t);
    CHECK(a.c(0, 0) == doctest::Approx(o.c).epsilon(1e-13));
    CHECK(a.cprime(0, 0) == doctest::Approx(o.cprime).epsilon(1e-13));
    CHECK(a.csecond(0, 0) == doctest::Approx(o.csecond).epsilon(1e-13));
    if (t > 0.0) {
      const auto b = pv.eval(t);
      const auto q = oracle::pauli_villars_scalar(1.3, t);
      CHECK(b.c(0, 0) == doctest::Approx(q.c).epsilon(1e-12));
      CHECK(b.cprime(0, 0) == doctest::Approx(q.cprime).epsilon(1e-12));
      CHECK(b.csecond(0, 0) == doctest::Approx(q.csecond).epsilon(1e-12));
    }
  }
}

TEST_CASE("matrix derivatives match central differences for a non-diagonal C_inf") {
  Matrix cinf(2, 2);
  cinf << 1.5, 0.4, 0.4, 0.8;
  for (auto kind : {ScheduleKind::HeatKernel, ScheduleKind::PauliVillars}) {
    const auto sch = make_schedule(kind, cinf);
    const double t = 0.7;
    const double h = 1e-4;
    const auto m = sch.eval(t - h);
    const auto p = sch.eval(t + h);
    const auto c = sch.eval(t);
    CHECK(((p.c - m.c) / (2 * h) - c.cprime).norm() < 1e-7);
    CHECK(((p.cprime - m.cprime) / (2 * h) - c.csecond).norm() < 1e-7);
    // increasing towards C_inf
    CHECK(min_eigenvalue(sch.remaining(t)) > 0.0);
    CHECK(min_eigenvalue(c.cprime) > 0.0);
  }
}

TEST_CASE("speed radius is the spectral radius of C_t'") {
  const auto sch = CovarianceSchedule::heat_kernel(diag2(1.0, 2.0));
  CHECK(sch.speed_radius(0.0) == doctest::Approx(1.0));
  CHECK(sch.speed_radius(1.0) == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("invalid schedules are rejected") {
  CHECK_THROWS_AS(CovarianceSchedule::heat_kernel(diag2(1.0, -1.0)), DomainError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::PauliVillars, scalar(0.5), scalar(3.0)), DomainError);
  CHECK_THROWS_AS(parse_schedule_kind("wavelet"), DomainError);
  const auto sch = CovarianceSchedule::heat_kernel(scalar(1.0));
  CHECK_THROWS_AS(sch.remaining_inverse(40.0), DomainError);
}

TEST_CASE("custom table snaps to nodes and rejects out-of-range queries") {
  std::istringstream in(
      "# t c cp cpp\n"
      "t c[0,0] cp[0,0] cpp[0,0]\n"
      "0 0 1 -1\n"
      "1 0.5 0.25 -0.5\n"
      "2 0.75 0.125 -0.25\n");
  const auto rows = read_covariance_table(in);
  REQUIRE(rows.size() == 3);
  const auto sch = CovarianceSchedule::custom_table(scalar(1.0), rows);
  CHECK(sch.eval(0.9).c(0, 0) == 0.5);
  CHECK(sch.eval(1.6).cprime(0, 0) == 0.125);

  std::istringstream one("t c[0,0] cp[0,0] cpp[0,0]\n1 0.5 0.25 -0.5\n");
  const auto single = CovarianceSchedule::custom_table(scalar(1.0), read_covariance_table(one));
  CHECK_THROWS_WITH_AS(single.eval(2.0), doctest::Contains("outside table range"), DomainError);
}

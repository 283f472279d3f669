#include "rgflow/covariance.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rgflow {
namespace {

constexpr double kPsdTol = 1e-10;
constexpr double kSingularTol = 1e-12;

Matrix from_spectrum(const Matrix& basis, const Vector& diag) {
  return basis * diag.asDiagonal() * basis.transpose();
}

void validate_rows(const Matrix& c_inf, const std::vector<CovarianceTableRow>& rows) {
  if (rows.empty()) throw DomainError("covariance table has no rows");
  const auto d = c_inf.rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.c.rows() != d || r.cprime.rows() != d || r.csecond.rows() != d) {
      throw DomainError("covariance table row dimension does not match C_infinity");
    }
    if (!is_symmetric(r.c, 1e-10) || !is_symmetric(r.cprime, 1e-10) ||
        !is_symmetric(r.csecond, 1e-10)) {
      throw DomainError("covariance table row at t=" + std::to_string(r.t) +
                        " is not symmetric");
    }
    if (r.t < 0.0) throw DomainError("covariance table has negative time");
    if (min_eigenvalue(r.c) < -kPsdTol) {
      throw DomainError("covariance table C_t not positive semidefinite at t=" +
                        std::to_string(r.t));
    }
    if (min_eigenvalue(r.cprime) < -kPsdTol) {
      throw DomainError("covariance table C_t' not positive semidefinite at t=" +
                        std::to_string(r.t));
    }
    if (i > 0) {
      if (!(r.t > rows[i - 1].t)) throw DomainError("covariance table times must increase");
      if (min_eigenvalue(r.c - rows[i - 1].c) < -kPsdTol) {
        throw DomainError("covariance table is not nondecreasing at t=" + std::to_string(r.t));
      }
    }
    if (r.t == 0.0 && r.c.cwiseAbs().maxCoeff() > kPsdTol) {
      throw DomainError("covariance table must have C_0 = 0");
    }
  }
}

}  // namespace

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::HeatKernel:
      return "heat-kernel";
    case ScheduleKind::PauliVillars:
      return "pauli-villars";
    case ScheduleKind::CustomTable:
      return "custom-table";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "heat-kernel") return ScheduleKind::HeatKernel;
  if (name == "pauli-villars") return ScheduleKind::PauliVillars;
  if (name == "custom-table") return ScheduleKind::CustomTable;
  throw DomainError("unknown schedule kind '" + name + "'");
}

CovarianceSchedule CovarianceSchedule::heat_kernel(const Matrix& c_infinity) {
  require_spd(c_infinity, "C_infinity");
  CovarianceSchedule s;
  s.kind_ = ScheduleKind::HeatKernel;
  s.c_inf_ = symmetrize(c_infinity);
  auto eig = symmetric_eigen(s.c_inf_);
  s.basis_ = eig.vectors;
  s.variances_ = eig.values;
  return s;
}

CovarianceSchedule CovarianceSchedule::pauli_villars(const Matrix& c_infinity) {
  auto s = heat_kernel(c_infinity);
  s.kind_ = ScheduleKind::PauliVillars;
  return s;
}

CovarianceSchedule CovarianceSchedule::custom_table(const Matrix& c_infinity,
                                                    std::vector<CovarianceTableRow> rows) {
  auto s = heat_kernel(c_infinity);
  s.kind_ = ScheduleKind::CustomTable;
  validate_rows(s.c_inf_, rows);
  s.rows_ = std::move(rows);
  return s;
}

std::pair<double, double> CovarianceSchedule::time_range() const {
  if (kind_ == ScheduleKind::CustomTable) return {rows_.front().t, rows_.back().t};
  return {0.0, std::numeric_limits<double>::infinity()};
}

const CovarianceTableRow& CovarianceSchedule::snap(double t) const {
  const auto [lo, hi] = time_range();
  const double slack = 1e-12 * std::max(1.0, std::abs(hi));
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream os;
    os << "t=" << t << " outside table range [" << lo << ", " << hi << "]";
    throw DomainError(os.str());
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows_.size(); ++i) {
    if (std::abs(rows_[i].t - t) < std::abs(rows_[best].t - t)) best = i;
  }
  return rows_[best];
}

CovarianceSample CovarianceSchedule::eval(double t) const {
  if (!(t >= 0.0)) throw DomainError("covariance schedule queried at negative time");
  if (kind_ == ScheduleKind::CustomTable) {
    const auto& r = snap(t);
    return {r.c, r.cprime, r.csecond};
  }
  const auto n = variances_.size();
  Vector c(n);
  Vector cp(n);
  Vector cpp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = variances_(i);
    if (kind_ == ScheduleKind::HeatKernel) {
      const double decay = std::exp(-t / v);
      c(i) = -v * std::expm1(-t / v);
      cp(i) = decay;
      cpp(i) = -decay / v;
    } else {
      // (a + 1/t)^{-1} = t / (t a + 1) with a = 1/v; finite at t = 0.
      const double a = 1.0 / v;
      const double denom = t * a + 1.0;
      c(i) = t / denom;
      cp(i) = 1.0 / (denom * denom);
      cpp(i) = -2.0 * a / (denom * denom * denom);
    }
  }
  return {from_spectrum(basis_, c), from_spectrum(basis_, cp), from_spectrum(basis_, cpp)};
}

Matrix CovarianceSchedule::remaining(double t) const {
  if (kind_ == ScheduleKind::CustomTable) return symmetrize(c_inf_ - snap(t).c);
  const auto n = variances_.size();
  Vector r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = variances_(i);
    r(i) = kind_ == ScheduleKind::HeatKernel ? v * std::exp(-t / v) : v * v / (t + v);
  }
  return from_spectrum(basis_, r);
}

Matrix CovarianceSchedule::remaining_inverse(double t) const {
  if (kind_ == ScheduleKind::CustomTable) {
    const Matrix r = remaining(t);
    const auto eig = symmetric_eigen(r);
    if (eig.values(0) < kSingularTol) {
      throw DomainError("flow time too large for this resolution: C_inf - C_t is singular");
    }
    return from_spectrum(eig.vectors, eig.values.cwiseInverse());
  }
  const auto n = variances_.size();
  Vector inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = variances_(i);
    const double rem = kind_ == ScheduleKind::HeatKernel ? v * std::exp(-t / v) : v * v / (t + v);
    if (rem < kSingularTol) {
      throw DomainError("flow time too large for this resolution: C_inf - C_t is singular");
    }
    // Pauli–Villars: a (t a + 1) computed directly to avoid the reciprocal.
    inv(i) = kind_ == ScheduleKind::HeatKernel ? std::exp(t / v) / v : (t + v) / (v * v);
  }
  return from_spectrum(basis_, inv);
}

double CovarianceSchedule::speed_radius(double t) const {
  return spectral_radius(eval(t).cprime);
}

CovarianceSchedule make_schedule(ScheduleKind kind, const Matrix& c_infinity,
                                 const std::optional<Matrix>& aux) {
  switch (kind) {
    case ScheduleKind::HeatKernel:
      return CovarianceSchedule::heat_kernel(c_infinity);
    case ScheduleKind::PauliVillars: {
      auto s = CovarianceSchedule::pauli_villars(c_infinity);
      if (aux) {
        const Matrix expected = c_infinity.inverse();
        if (aux->rows() != expected.rows() ||
            (*aux - expected).cwiseAbs().maxCoeff() >
                1e-10 * std::max(1.0, expected.cwiseAbs().maxCoeff())) {
          throw DomainError("Pauli-Villars mass matrix A must equal C_infinity^{-1}");
        }
      }
      return s;
    }
    case ScheduleKind::CustomTable:
      throw DomainError("custom-table schedules are built from table rows");
  }
  throw DomainError("unknown schedule kind");
}

std::vector<CovarianceTableRow> read_covariance_table(std::istream& in) {
  auto tokenize = [](std::string line) {
    int depth = 0;  // commas inside c[i,j] belong to the name
    for (char& ch : line) {
      if (ch == '[') ++depth;
      if (ch == ']') --depth;
      if ((ch == ',' && depth == 0) || ch == '\t') ch = ' ';
    }
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) out.push_back(tok);
    return out;
  };
  std::vector<std::string> header;
  std::vector<CovarianceTableRow> rows;
  int d = 0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (header.empty()) {
      header = toks;
      if (header.front() != "t") throw DomainError("covariance table header must start with 't'");
      const auto n = header.size() - 1;
      if (n % 3 != 0) throw DomainError("covariance table header must hold 3 d^2 matrix columns");
      d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n / 3))));
      if (static_cast<std::size_t>(3 * d * d) != n || d < 1) {
        throw DomainError("covariance table header column count is not 1 + 3 d^2");
      }
      for (int k = 0; k < d * d; ++k) {
        const std::string idx = "[" + std::to_string(k / d) + "," + std::to_string(k % d) + "]";
        if (header[1 + k] != "c" + idx || header[1 + d * d + k] != "cp" + idx ||
            header[1 + 2 * d * d + k] != "cpp" + idx) {
          throw DomainError("covariance table header column " + std::to_string(k + 1) +
                            " does not follow the c[i,j] cp[i,j] cpp[i,j] layout");
        }
      }
      continue;
    }
    if (toks.size() != header.size()) {
      throw DomainError("covariance table line " + std::to_string(lineno) +
                        " has the wrong number of columns");
    }
    CovarianceTableRow row;
    std::vector<double> vals;
    for (const auto& tok : toks) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DomainError("covariance table line " + std::to_string(lineno) +
                          ": not a number '" + tok + "'");
      }
    }
    row.t = vals[0];
    row.c.resize(d, d);
    row.cprime.resize(d, d);
    row.csecond.resize(d, d);
    for (int k = 0; k < d * d; ++k) {
      row.c(k / d, k % d) = vals[1 + k];
      row.cprime(k / d, k % d) = vals[1 + d * d + k];
      row.csecond(k / d, k % d) = vals[1 + 2 * d * d + k];
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw DomainError("covariance table is empty");
  return rows;
}

std::vector<CovarianceTableRow> load_covariance_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open covariance table '" + path + "'");
  return read_covariance_table(in);
}

}  // namespace rgflow

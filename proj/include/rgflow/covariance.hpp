#pragma once

#include "rgflow/linalg.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rgflow {

enum class ScheduleKind { HeatKernel, PauliVillars, CustomTable };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

/// C_t together with its first two time derivatives.
struct CovarianceSample {
  Matrix c;
  Matrix cprime;
  Matrix csecond;
};

struct CovarianceTableRow {
  double t = 0.0;
  Matrix c;
  Matrix cprime;
  Matrix csecond;
};

/// A covariance decomposition t -> C_t increasing from C_0 = 0 to C_infinity.
///
/// The two built-in families have closed forms diagonal in the eigenbasis of
/// C_infinity:
///   heat-kernel     C_t = C_inf - C_inf exp(-t C_inf^{-1})
///   pauli-villars   C_t = (A + 1/t)^{-1},  A = C_inf^{-1}
/// Custom tables are sampled triples; queries snap to the nearest node and
/// never interpolate.
///
/// Immutable after construction.
class CovarianceSchedule {
 public:
  static CovarianceSchedule heat_kernel(const Matrix& c_infinity);
  static CovarianceSchedule pauli_villars(const Matrix& c_infinity);
  static CovarianceSchedule custom_table(const Matrix& c_infinity,
                                         std::vector<CovarianceTableRow> rows);

  ScheduleKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(c_inf_.rows()); }
  const Matrix& c_infinity() const { return c_inf_; }

  CovarianceSample eval(double t) const;

  /// C_inf - C_t.
  Matrix remaining(double t) const;
  /// (C_inf - C_t)^{-1}; throws DomainError when an eigenvalue of
  /// C_inf - C_t drops below 1e-12.
  Matrix remaining_inverse(double t) const;

  /// Spectral radius |C_t'|.
  double speed_radius(double t) const;

  /// Valid query range; [0, inf) for the built-in kinds.
  std::pair<double, double> time_range() const;

  const std::vector<CovarianceTableRow>& table() const { return rows_; }

 private:
  CovarianceSchedule() = default;
  const CovarianceTableRow& snap(double t) const;

  ScheduleKind kind_ = ScheduleKind::HeatKernel;
  Matrix c_inf_;
  Matrix basis_;       // eigenvectors of C_inf
  Vector variances_;   // eigenvalues of C_inf
  std::vector<CovarianceTableRow> rows_;
};

/// `aux` is the Pauli–Villars mass matrix A; when given it must equal
/// c_infinity^{-1}.
CovarianceSchedule make_schedule(ScheduleKind kind, const Matrix& c_infinity,
                                 const std::optional<Matrix>& aux = std::nullopt);

/// Reads the columnar table format: a header `t c[i,j]... cp[i,j]... cpp[i,j]...`
/// (row-major flattening), whitespace or comma separated, `#` comments.
std::vector<CovarianceTableRow> read_covariance_table(std::istream& in);
std::vector<CovarianceTableRow> load_covariance_table(const std::string& path);

}  // namespace rgflow

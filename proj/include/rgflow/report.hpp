#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace rgflow {

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

enum class Status { Pass, Fail, Unconverged };
std::string to_string(Status status);

/// One quantitative claim: `margin` is signed so that margin >= -tolerance
/// (or value <= bound, as documented per check) means the claim holds.
struct CheckRow {
  std::string check;
  std::string item;
  double s = kNotApplicable;
  double t = kNotApplicable;
  int k = -1;
  double value = kNotApplicable;
  double bound = kNotApplicable;
  double margin = kNotApplicable;
  double tolerance = kNotApplicable;
  Status status = Status::Pass;
  std::string note;
};

struct ScheduleRow {
  double t = 0.0;
  double lambda_prime = 0.0;
  double alpha_prime = 0.0;
  double lambda_int = 0.0;
  double alpha_int = 0.0;
  int samples_used = 0;
  // phi4 only
  double chi = kNotApplicable;
  double chi_stderr = kNotApplicable;
  double sigma_min = kNotApplicable;
};

struct SpectrumRow {
  std::string metric;  // weighted | unweighted
  double t = 0.0;
  std::vector<double> mu;
  bool converged = true;
};

struct RunReport {
  std::vector<CheckRow> checks;
  std::vector<ScheduleRow> schedule;
  bool phi4_columns = false;
  std::vector<SpectrumRow> spectrum;
  std::string config_echo;
  std::string version;
  double wall_clock_seconds = 0.0;  // printed to stderr only, never to files

  /// 0 all pass, 1 any failure, 3 numerical non-convergence without failure.
  int exit_code() const;
};

enum class ReportFormat { Csv, JsonLines };

/// Writes checks, schedule and spectrum tables plus the config echo into
/// `directory` (created if needed). Throws std::runtime_error naming the
/// path when a file cannot be written.
void emit_report(const RunReport& report, const std::string& directory,
                 const std::vector<ReportFormat>& formats = {ReportFormat::Csv,
                                                             ReportFormat::JsonLines});

std::string checks_csv(const RunReport& report);
std::string checks_jsonl(const RunReport& report);
std::string schedule_csv(const RunReport& report);
std::string schedule_jsonl(const RunReport& report);
std::string spectrum_csv(const RunReport& report);
std::string spectrum_jsonl(const RunReport& report);

}  // namespace rgflow

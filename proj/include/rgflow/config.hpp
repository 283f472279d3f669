#pragma once

#include "rgflow/covariance.hpp"
#include "rgflow/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rgflow {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text: `#` starts a comment, values are numbers, bare or
/// quoted strings, bracketed lists `[1, 2]` or row lists `[[1, 0], [0, 1]]`.
/// A value with open brackets continues on the following lines.
class ConfigTree {
 public:
  static ConfigTree parse(std::istream& in, const std::string& source = "<config>");
  static ConfigTree load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }
  void set(const std::string& key, const std::string& raw) { values_[key] = raw; }

  std::string get_string(const std::string& key, const std::optional<std::string>& fallback = {}) const;
  double get_double(const std::string& key, const std::optional<double>& fallback = {}) const;
  long get_int(const std::string& key, const std::optional<long>& fallback = {}) const;
  bool get_bool(const std::string& key, const std::optional<bool>& fallback = {}) const;
  std::vector<double> get_vector(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;
  /// A scalar is accepted as a 1x1 matrix, a flat list as a diagonal.
  Matrix get_matrix(const std::string& key) const;

 private:
  std::string raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::string source_;
};

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"spectrum",     "theorem",   "higher-k",
                                              "intertwining", "variance",  "criterion",
                                              "phi4-identity", "heatflow"};
  return names;
}

struct ModelSpec {
  std::string kind = "gaussian";  // gaussian | quadratic | phi4 | custom-poly
  int dim = 1;
  Matrix b;                       // quadratic
  Matrix a;                       // phi4
  double g = 1.0;
  double nu = 0.0;
  Vector h;
  Vector quartic, quadratic, linear;  // custom-poly
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::HeatKernel;
  Matrix c_infinity;
  std::string table;
};

struct TimeGridSpec {
  double min = 0.0;
  double max = 1.0;
  int count = 2;
  std::string spacing = "lin";
  std::vector<double> values;  // explicit grid, overrides the rest

  std::vector<double> materialize() const;
};

struct ExperimentConfig {
  ModelSpec model;
  ScheduleSpec schedule;
  TimeGridSpec t_grid;
  std::optional<double> box_half_width;
  int grid_points = 513;
  int quadrature_order = 40;
  int eigen_count = 3;
  int curvature_per_axis = 17;
  int curvature_random = 100;
  int curvature_refine_steps = 20;
  int curvature_subdivisions = 4;
  std::vector<std::string> checks;
  std::uint64_t seed = 1;
  std::string output = "out";
  double tolerance_total = 1e-4;

  std::vector<Vector> test_centers;
  double test_radius = 1.5;

  std::vector<double> intertwining_times;
  double intertwining_allowance = 1e-4;
  int intertwining_points = 101;

  std::vector<double> poincare_s;

  std::string variance_function = "bump";  // linear | bump | gaussian-bump
  Vector variance_center;
  double variance_radius = 1.5;
  TimeGridSpec variance_grid;
  int variance_grid_points = 201;
  double variance_tolerance = 1e-3;

  std::vector<double> phi4_times;
  int phi4_samples = 10;
  double phi4_sample_width = 1.5;
  bool phi4_mcmc = false;

  std::string heatflow_density = "uniform";  // uniform | gaussian | bimodal | table
  std::string heatflow_table;
  TimeGridSpec heatflow_s;
  int heatflow_grid_points = 1025;

  ConfigTree tree;  // raw entries, for the echo

  bool wants(const std::string& check) const;
  /// Canonical `key = value` text that reproduces this configuration.
  std::string echo() const;
};

ExperimentConfig parse_config(const ConfigTree& tree);
ExperimentConfig load_config(const std::string& path);

/// Formats a double with 17 significant digits.
std::string format_double(double v);

}  // namespace rgflow

#include "rgflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rgflow {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

int bracket_balance(const std::string& s) {
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

// Nested list syntax tree.
struct Node {
  bool list = false;
  std::string atom;
  std::vector<Node> items;
};

Node parse_node(const std::string& s, std::size_t& pos, const std::string& key) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  Node n;
  if (pos < s.size() && s[pos] == '[') {
    n.list = true;
    ++pos;
    while (true) {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos >= s.size()) throw ConfigError("unterminated list in '" + key + "'");
      if (s[pos] == ']') {
        ++pos;
        break;
      }
      n.items.push_back(parse_node(s, pos, key));
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos < s.size() && s[pos] == ',') ++pos;
    }
    return n;
  }
  const auto start = pos;
  if (pos < s.size() && s[pos] == '"') {
    const auto close = s.find('"', pos + 1);
    if (close == std::string::npos) throw ConfigError("unterminated string in '" + key + "'");
    n.atom = s.substr(pos + 1, close - pos - 1);
    pos = close + 1;
    return n;
  }
  while (pos < s.size() && s[pos] != ',' && s[pos] != ']' && s[pos] != '[') ++pos;
  n.atom = trim(s.substr(start, pos - start));
  return n;
}

Node parse_value(const std::string& raw, const std::string& key) {
  std::size_t pos = 0;
  Node n = parse_node(raw, pos, key);
  if (!trim(raw.substr(pos)).empty()) throw ConfigError("trailing text in value of '" + key + "'");
  return n;
}

double to_double(const std::string& atom, const std::string& key) {
  const std::string s = trim(atom);
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

std::string unquote(const std::string& s) {
  const std::string t = trim(s);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
  return t;
}

const std::set<std::string>& allowed_keys() {
  static const std::set<std::string> keys{
      "model.kind", "model.dim", "model.B", "model.A", "model.lattice", "model.sites", "model.g",
      "model.nu", "model.h", "model.quartic", "model.quadratic", "model.linear",
      "schedule.kind", "schedule.c_infinity", "schedule.A", "schedule.table",
      "t_grid.min", "t_grid.max", "t_grid.count", "t_grid.spacing", "t_grid.values",
      "discretization.box_half_width", "discretization.grid_points",
      "discretization.quadrature_order", "discretization.eigen_count",
      "curvature.per_axis", "curvature.random_points", "curvature.refine_steps",
      "curvature.subdivisions",
      "checks", "seed", "output", "tolerance.total",
      "test_function.centers", "test_function.radius",
      "intertwining.times", "intertwining.allowance", "intertwining.points",
      "poincare.s",
      "variance.function", "variance.center", "variance.radius", "variance.t_min",
      "variance.t_max", "variance.count", "variance.spacing", "variance.grid_points",
      "variance.tolerance",
      "phi4.times", "phi4.samples", "phi4.sample_width", "phi4.mcmc",
      "heatflow.density", "heatflow.table", "heatflow.s_min", "heatflow.s_max",
      "heatflow.s_count", "heatflow.grid_points"};
  return keys;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ConfigTree ConfigTree::parse(std::istream& in, const std::string& source) {
  ConfigTree tree;
  tree.source_ = source;
  std::string line;
  int lineno = 0;
  std::string pending_key;
  std::string pending_value;
  int pending_line = 0;
  auto commit = [&]() {
    if (pending_key.empty()) return;
    if (bracket_balance(pending_value) != 0) {
      throw ConfigError(source + ":" + std::to_string(pending_line) + ": unbalanced brackets in '" +
                        pending_key + "'");
    }
    if (tree.values_.count(pending_key)) {
      throw ConfigError(source + ":" + std::to_string(pending_line) + ": duplicate key '" +
                        pending_key + "'");
    }
    tree.values_[pending_key] = trim(pending_value);
    pending_key.clear();
    pending_value.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(strip_comment(line));
    if (!pending_key.empty() && bracket_balance(pending_value) > 0) {
      pending_value += " " + text;
      if (bracket_balance(pending_value) <= 0) commit();
      continue;
    }
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    pending_key = trim(text.substr(0, eq));
    pending_value = trim(text.substr(eq + 1));
    pending_line = lineno;
    if (pending_key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (bracket_balance(pending_value) <= 0) commit();
  }
  if (!pending_key.empty()) commit();
  return tree;
}

ConfigTree ConfigTree::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in, path);
}

std::string ConfigTree::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

std::string ConfigTree::get_string(const std::string& key,
                                   const std::optional<std::string>& fallback) const {
  if (!has(key)) {
    if (fallback) return *fallback;
    return raw(key);
  }
  return unquote(raw(key));
}

double ConfigTree::get_double(const std::string& key, const std::optional<double>& fallback) const {
  if (!has(key) && fallback) return *fallback;
  return to_double(raw(key), key);
}

long ConfigTree::get_int(const std::string& key, const std::optional<long>& fallback) const {
  if (!has(key) && fallback) return *fallback;
  const double v = to_double(raw(key), key);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError("'" + key + "' expects an integer");
  return static_cast<long>(v);
}

bool ConfigTree::get_bool(const std::string& key, const std::optional<bool>& fallback) const {
  if (!has(key) && fallback) return *fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + key + "' expects true or false");
}

std::vector<double> ConfigTree::get_vector(const std::string& key) const {
  const Node n = parse_value(raw(key), key);
  if (!n.list) return {to_double(n.atom, key)};
  std::vector<double> out;
  for (const auto& item : n.items) {
    if (item.list) throw ConfigError("'" + key + "' expects a flat list of numbers");
    out.push_back(to_double(item.atom, key));
  }
  return out;
}

std::vector<std::string> ConfigTree::get_string_list(const std::string& key) const {
  const Node n = parse_value(raw(key), key);
  if (!n.list) return {unquote(n.atom)};
  std::vector<std::string> out;
  for (const auto& item : n.items) {
    if (item.list) throw ConfigError("'" + key + "' expects a flat list of names");
    out.push_back(unquote(item.atom));
  }
  return out;
}

Matrix ConfigTree::get_matrix(const std::string& key) const {
  const Node n = parse_value(raw(key), key);
  if (!n.list) return Matrix::Constant(1, 1, to_double(n.atom, key));
  if (!n.items.empty() && !n.items.front().list) {
    const auto diag = get_vector(key);
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(diag.size()), static_cast<Eigen::Index>(diag.size()));
    for (std::size_t i = 0; i < diag.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
    return m;
  }
  std::vector<std::vector<double>> rows;
  for (const auto& row : n.items) {
    if (!row.list) throw ConfigError("'" + key + "' mixes rows and scalars");
    std::vector<double> r;
    for (const auto& item : row.items) {
      if (item.list) throw ConfigError("'" + key + "' nests too deeply");
      r.push_back(to_double(item.atom, key));
    }
    rows.push_back(r);
  }
  try {
    return matrix_from_rows(rows);
  } catch (const std::exception& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

std::vector<double> TimeGridSpec::materialize() const {
  if (!values.empty()) {
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (!(values[i] > values[i - 1])) throw ConfigError("time grid values must increase");
    }
    return values;
  }
  if (count < 2) throw ConfigError("time grid needs count >= 2");
  if (!(max > min)) throw ConfigError("time grid needs max > min");
  std::vector<double> out;
  if (spacing == "lin") {
    for (int i = 0; i < count; ++i) out.push_back(i + 1 == count ? max : min + (max - min) * i / (count - 1));
  } else if (spacing == "log") {
    if (!(min > 0.0)) throw ConfigError("log-spaced time grid needs min > 0");
    const double a = std::log(min);
    const double b = std::log(max);
    for (int i = 0; i < count; ++i) {
      out.push_back(i == 0 ? min : i + 1 == count ? max : std::exp(a + (b - a) * i / (count - 1)));
    }
  } else {
    throw ConfigError("time grid spacing must be 'lin' or 'log', got '" + spacing + "'");
  }
  return out;
}

bool ExperimentConfig::wants(const std::string& check) const {
  return std::find(checks.begin(), checks.end(), check) != checks.end();
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  for (const auto& [key, value] : tree.entries()) out << key << " = " << value << "\n";
  return out.str();
}

namespace {

TimeGridSpec read_grid(const ConfigTree& t, const std::string& prefix, const TimeGridSpec& defaults) {
  TimeGridSpec g = defaults;
  g.min = t.get_double(prefix + "min", defaults.min);
  g.max = t.get_double(prefix + "max", defaults.max);
  g.count = static_cast<int>(t.get_int(prefix + "count", defaults.count));
  g.spacing = t.get_string(prefix + "spacing", defaults.spacing);
  if (t.has(prefix + "values")) g.values = t.get_vector(prefix + "values");
  return g;
}

std::vector<Vector> read_points(const ConfigTree& t, const std::string& key, int dim) {
  const Matrix m = t.get_matrix(key);
  std::vector<Vector> out;
  // A flat list [a, b, c] is read as diagonal; in 1D it means three points.
  const Node n = parse_value(t.get_string(key), key);
  if (n.list && !n.items.empty() && !n.items.front().list) {
    for (const double v : t.get_vector(key)) {
      if (dim != 1) throw ConfigError("'" + key + "' needs rows of length " + std::to_string(dim));
      out.push_back(Vector::Constant(1, v));
    }
    return out;
  }
  if (m.cols() != dim) throw ConfigError("'" + key + "' needs rows of length " + std::to_string(dim));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExperimentConfig parse_config(const ConfigTree& t) {
  for (const auto& [key, value] : t.entries()) {
    if (!allowed_keys().count(key)) throw ConfigError("unknown key '" + key + "'");
  }
  ExperimentConfig c;
  c.tree = t;

  // Checks first, so a bad name fails before anything else is interpreted.
  if (t.has("checks")) {
    const std::string raw = trim(t.get_string("checks"));
    if (raw != "[]") c.checks = t.get_string_list("checks");
  }
  for (const auto& name : c.checks) {
    if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end()) {
      throw ConfigError("unknown check '" + name + "'");
    }
  }

  auto& m = c.model;
  m.kind = t.get_string("model.kind", std::string("gaussian"));
  const std::string sched = t.get_string("schedule.kind", m.kind == "phi4" ? "pauli-villars" : "heat-kernel");
  try {
    c.schedule.kind = parse_schedule_kind(sched);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  if (m.kind == "phi4") {
    if (t.has("model.A")) {
      m.a = t.get_matrix("model.A");
    } else {
      const std::string lattice = t.get_string("model.lattice", std::string("chain"));
      if (lattice != "chain") throw ConfigError("model.lattice must be 'chain'");
      const long sites = t.get_int("model.sites", 1L);
      if (sites < 1) throw ConfigError("model.sites must be >= 1");
      m.a = Matrix(2.0 * Matrix::Identity(sites, sites));
      for (long i = 0; i + 1 < sites; ++i) m.a(i, i + 1) = m.a(i + 1, i) = -1.0;
    }
    m.dim = static_cast<int>(m.a.rows());
    m.g = t.get_double("model.g", 1.0);
    m.nu = t.get_double("model.nu", 0.0);
    m.h = t.has("model.h") ? to_vector(t.get_vector("model.h")) : Vector(Vector::Zero(m.dim));
    if (m.h.size() != m.dim) throw ConfigError("model.h needs one entry per site");
    if (c.schedule.kind != ScheduleKind::PauliVillars) {
      throw ConfigError("phi4 models use the pauli-villars schedule");
    }
    try {
      require_spd(m.a, "model.A");
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    c.schedule.c_infinity = m.a.inverse();
    if (t.has("schedule.A") && (t.get_matrix("schedule.A") - m.a).norm() > 1e-12) {
      throw ConfigError("schedule.A must equal model.A");
    }
  } else {
    if (t.has("schedule.c_infinity")) {
      c.schedule.c_infinity = t.get_matrix("schedule.c_infinity");
    } else if (t.has("schedule.A")) {
      c.schedule.c_infinity = t.get_matrix("schedule.A").inverse();
    } else {
      const long d = t.get_int("model.dim", 1L);
      c.schedule.c_infinity = Matrix::Identity(d, d);
    }
    m.dim = static_cast<int>(c.schedule.c_infinity.rows());
    if (t.has("model.dim") && t.get_int("model.dim") != m.dim) {
      throw ConfigError("model.dim disagrees with schedule.c_infinity");
    }
    if (m.kind == "quadratic") {
      m.b = t.get_matrix("model.B");
      if (m.b.rows() != m.dim) throw ConfigError("model.B has the wrong dimension");
    } else if (m.kind == "custom-poly") {
      auto read = [&](const char* key) {
        return t.has(key) ? to_vector(t.get_vector(key)) : Vector(Vector::Zero(m.dim));
      };
      m.quartic = read("model.quartic");
      m.quadratic = read("model.quadratic");
      m.linear = read("model.linear");
      if (m.quartic.size() != m.dim || m.quadratic.size() != m.dim || m.linear.size() != m.dim) {
        throw ConfigError("custom-poly coefficient lists need one entry per dimension");
      }
    } else if (m.kind != "gaussian") {
      throw ConfigError("model.kind must be gaussian, quadratic, phi4 or custom-poly");
    }
  }
  if (m.dim > 3) {
    const bool grid_checks = c.wants("spectrum") || c.wants("theorem") || c.wants("higher-k") ||
                             c.wants("intertwining") || c.wants("variance") || c.wants("criterion");
    if (grid_checks) throw ConfigError("grid-based checks support at most 3 dimensions");
  }
  c.schedule.table = t.get_string("schedule.table", std::string());
  if (c.schedule.kind == ScheduleKind::CustomTable && c.schedule.table.empty()) {
    throw ConfigError("custom-table schedule needs schedule.table");
  }

  c.t_grid = read_grid(t, "t_grid.", TimeGridSpec{0.0, 1.0, 5, "lin", {}});
  if (c.t_grid.values.empty() && c.t_grid.count < 2) throw ConfigError("t_grid.count must be >= 2");
  if (t.has("discretization.box_half_width")) c.box_half_width = t.get_double("discretization.box_half_width");
  c.grid_points = static_cast<int>(t.get_int("discretization.grid_points", 513L));
  if (c.grid_points < 9 || c.grid_points % 2 == 0) {
    throw ConfigError("discretization.grid_points must be odd and >= 9");
  }
  c.quadrature_order = static_cast<int>(t.get_int("discretization.quadrature_order", 40L));
  c.eigen_count = static_cast<int>(t.get_int("discretization.eigen_count", 3L));
  if (c.eigen_count < 1) throw ConfigError("discretization.eigen_count must be >= 1");
  c.curvature_per_axis = static_cast<int>(t.get_int("curvature.per_axis", 17L));
  c.curvature_random = static_cast<int>(t.get_int("curvature.random_points", 100L));
  c.curvature_refine_steps = static_cast<int>(t.get_int("curvature.refine_steps", 20L));
  c.curvature_subdivisions = static_cast<int>(t.get_int("curvature.subdivisions", 4L));

  const long seed = t.get_int("seed", 1L);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output = t.get_string("output", std::string("out"));
  c.tolerance_total = t.get_double("tolerance.total", 1e-4);

  if (t.has("test_function.centers")) {
    c.test_centers = read_points(t, "test_function.centers", m.dim);
  } else {
    for (double v : {-0.4, 0.0, 0.4}) {
      Vector x = Vector::Zero(m.dim);
      x(0) = v;
      c.test_centers.push_back(x);
    }
  }
  c.test_radius = t.get_double("test_function.radius", 1.5);

  c.intertwining_times = t.has("intertwining.times") ? t.get_vector("intertwining.times")
                                                     : std::vector<double>{};
  c.intertwining_allowance = t.get_double("intertwining.allowance", 1e-4);
  c.intertwining_points = static_cast<int>(t.get_int("intertwining.points", 101L));
  c.poincare_s = t.has("poincare.s") ? t.get_vector("poincare.s") : std::vector<double>{};

  c.variance_function = t.get_string("variance.function", std::string("bump"));
  if (c.variance_function != "linear" && c.variance_function != "bump" &&
      c.variance_function != "gaussian-bump") {
    throw ConfigError("variance.function must be linear, bump or gaussian-bump");
  }
  c.variance_center = t.has("variance.center") ? to_vector(t.get_vector("variance.center"))
                                               : Vector(Vector::Zero(m.dim));
  if (c.variance_center.size() != m.dim) throw ConfigError("variance.center has the wrong dimension");
  c.variance_radius = t.get_double("variance.radius", 1.5);
  c.variance_grid = read_grid(t, "variance.t_", TimeGridSpec{0.0, 20.0, 401, "lin", {}});
  c.variance_grid.spacing = t.get_string("variance.spacing", std::string("lin"));
  c.variance_grid.count = static_cast<int>(t.get_int("variance.count", 401L));
  c.variance_grid_points = static_cast<int>(t.get_int("variance.grid_points", 201L));
  c.variance_tolerance = t.get_double("variance.tolerance", 1e-3);

  c.phi4_times = t.has("phi4.times") ? t.get_vector("phi4.times") : std::vector<double>{0.5, 1.0, 2.0};
  c.phi4_samples = static_cast<int>(t.get_int("phi4.samples", 10L));
  c.phi4_sample_width = t.get_double("phi4.sample_width", 1.5);
  c.phi4_mcmc = t.get_bool("phi4.mcmc", false);
  if ((c.wants("phi4-identity")) && m.kind != "phi4") {
    throw ConfigError("check 'phi4-identity' needs model.kind = phi4");
  }

  c.heatflow_density = t.get_string("heatflow.density", std::string("uniform"));
  if (c.heatflow_density != "uniform" && c.heatflow_density != "gaussian" &&
      c.heatflow_density != "bimodal" && c.heatflow_density != "table") {
    throw ConfigError("heatflow.density must be uniform, gaussian, bimodal or table");
  }
  c.heatflow_table = t.get_string("heatflow.table", std::string());
  if (c.heatflow_density == "table" && c.heatflow_table.empty()) {
    throw ConfigError("heatflow.density = table needs heatflow.table");
  }
  c.heatflow_s = read_grid(t, "heatflow.s_", TimeGridSpec{0.0, 2.0, 21, "lin", {}});
  c.heatflow_grid_points = static_cast<int>(t.get_int("heatflow.grid_points", 1025L));
  if (c.heatflow_grid_points < 9 || c.heatflow_grid_points % 2 == 0) {
    throw ConfigError("heatflow.grid_points must be odd and >= 9");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(ConfigTree::load(path)); }

}  // namespace rgflow

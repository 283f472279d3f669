// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "rgflow/config.hpp"
#include "rgflow/experiment.hpp"
#include "rgflow/potential.hpp"
#include "rgflow/report.hpp"
#include "rgflow/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace rgflow;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Run {
  RunReport report;
  double seconds = 0.0;

  std::vector<CheckRow> rows(const std::string& check, const std::string& item) const {
    std::vector<CheckRow> out;
    for (const auto& r : report.checks) {
      if (r.check == check && r.item.rfind(item, 0) == 0) out.push_back(r);
    }
    return out;
  }
};

std::string config_path(const std::string& name) {
  return std::string(RGFLOW_CONFIG_DIR) + "/" + name;
}

// Runs are cached: several criteria read the same report.
const Run& run_config(const std::string& name) {
  static std::map<std::string, Run> cache;
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;
  const auto cfg = load_config(config_path(name));
  const auto start = std::chrono::steady_clock::now();
  Run r;
  r.report = run_experiment(cfg);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cache.emplace(name, std::move(r)).first->second;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Every row has margin >= -tolerance; returns the worst margin + tolerance.
double worst_slack(const std::vector<CheckRow>& rows) {
  double w = INFINITY;
  for (const auto& r : rows) w = std::min(w, r.margin + r.tolerance);
  return w;
}

bool all_pass(const std::vector<CheckRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.status == Status::Pass; });
}

Outcome gaussian_chain() {
  const auto& run = run_config("gaussian_chain.cfg");
  const auto cp = run.rows("spectrum", "poincare-weighted");
  const auto lam = run.rows("criterion", "lambda-prime");
  const auto alp = run.rows("criterion", "alpha-prime");
  const auto pairs = run.rows("theorem", "pair");
  double e_cp = 0, e_l = 0, e_a = 0, e_m = 0;
  for (const auto& r : cp) e_cp = std::max(e_cp, std::abs(r.value - 1.0));
  for (const auto& r : lam) e_l = std::max(e_l, std::abs(r.value - 0.5));
  for (const auto& r : alp) e_a = std::max(e_a, std::abs(r.value - 1.0));
  for (const auto& r : pairs) e_m = std::max(e_m, std::abs(r.margin));
  Outcome o;
  o.pass = cp.size() == 9 && lam.size() == 9 && alp.size() == 9 && pairs.size() == 36 &&
           e_cp <= 1e-3 && e_l <= 1e-8 && e_a <= 1e-8 && e_m <= 2e-3 && run.seconds < 10.0;
  o.detail = "max|CP-1|=" + fmt(e_cp) + " <= 1e-3, max|lambda'-1/2|=" + fmt(e_l) +
             " <= 1e-8, max|alpha'-1|=" + fmt(e_a) + " <= 1e-8, max|margin|=" + fmt(e_m) +
             " <= 2e-3, " + std::to_string(pairs.size()) + " pairs, " + fmt(run.seconds) + " s < 10 s";
  return o;
}

Outcome ou_spectrum() {
  const auto sch = CovarianceSchedule::heat_kernel(Matrix::Identity(1, 1));
  const FlowMeasure nu(sch, PotentialDescriptor::zero(1), 0.0, Grid(default_flow_box(sch, 0.0), {1025}));
  const auto sp = spectrum(build_generator(nu, nu.covariance().cprime, Drift::ScriptL), 4);
  double worst = 0.0;
  for (int k = 1; k <= 4; ++k) worst = std::max(worst, std::abs(sp.eigenvalues(k) - k) / k);
  Outcome o;
  o.pass = worst <= 3e-3 && sp.converged;
  o.detail = "max_k |mu_k - k|/k=" + fmt(worst) + " <= 3e-3 (k<=4, 1025 nodes), richardson_change=" +
             fmt(sp.richardson_change);
  return o;
}

Outcome quadratic_closed_form() {
  const Matrix one = Matrix::Identity(1, 1);
  const auto v0 = PotentialDescriptor::quadratic(one);
  const auto q = gauss_hermite_rule(kDefaultQuadratureOrder, 1);
  const Vector x = Vector::Constant(1, 1.0);
  const double v = renormalized_value(v0, one, x, q);
  const auto d = renormalized_derivatives(v0, one, x, q);
  const double expected = 0.25 + 0.5 * std::log(2.0);
  const double err = std::max({std::abs(v - expected), std::abs(d.grad(0) - 0.5), std::abs(d.hess(0, 0) - 0.5)});
  Outcome o;
  o.pass = err <= 1e-8;
  o.detail = "value=" + format_double(v) + ", max error=" + fmt(err) + " <= 1e-8";
  return o;
}

Outcome hessian_identity() {
  double worst = 0.0;
  std::size_t rows = 0;
  bool ok = true;
  for (const char* cfg : {"phi4_criterion_n1.cfg", "phi4_criterion_n2.cfg"}) {
    const auto r = run_config(cfg).rows("phi4-identity", "hessian");
    rows += r.size();
    ok = ok && r.size() == 3 && all_pass(r);
    for (const auto& row : r) worst = std::max(worst, row.value);
  }
  Outcome o;
  o.pass = ok && worst <= 1e-5;
  o.detail = "max relative error=" + fmt(worst) + " <= 1e-5 over " + std::to_string(rows) +
             " (n, t) cells of 10 samples";
  return o;
}

Outcome criterion_certification() {
  double slack = INFINITY, seconds = 0.0;
  std::size_t rows = 0;
  bool ok = true;
  for (const char* cfg : {"phi4_criterion_n1.cfg", "phi4_criterion_n2.cfg"}) {
    const auto& run = run_config(cfg);
    const auto r = run.rows("criterion", "phi4-lambda");
    rows += r.size();
    ok = ok && r.size() == 3 && all_pass(r);
    slack = std::min(slack, worst_slack(r));
    seconds += run.seconds;
  }
  Outcome o;
  o.pass = ok && slack >= 0.0 && seconds < 120.0;
  o.detail = "min(curvature lambda' - formula lambda' + 1e-6)=" + fmt(slack) + " >= 0 at " + std::to_string(rows) +
             " (n, t) points, " + fmt(seconds) + " s < 120 s";
  return o;
}

Outcome main_theorem() {
  const auto& run = run_config("phi4_double_well.cfg");
  const auto pairs = run.rows("theorem", "pair");
  const auto higher = run.rows("higher-k", "pair-k");
  double m1 = INFINITY, mk = INFINITY;
  for (const auto& r : pairs) m1 = std::min(m1, r.margin);
  int kmax = 0;
  for (const auto& r : higher) {
    mk = std::min(mk, r.margin);
    kmax = std::max(kmax, r.k);
  }
  Outcome o;
  o.pass = !pairs.empty() && !higher.empty() && kmax == 3 && all_pass(pairs) && all_pass(higher) &&
           m1 >= -1e-4 && mk >= -1e-4 && run.seconds < 300.0;
  o.detail = "min theorem margin=" + fmt(m1) + ", min higher-k margin=" + fmt(mk) + " (k<=" +
             std::to_string(kmax) + "), both >= -1e-4 over " + std::to_string(pairs.size()) +
             " pairs, " + fmt(run.seconds) + " s < 300 s";
  return o;
}

Outcome intertwining() {
  const auto r = run_config("phi4_double_well.cfg").rows("intertwining", "bump-");
  double worst = -INFINITY;
  for (const auto& row : r) worst = std::max(worst, row.value);
  Outcome o;
  o.pass = r.size() == 9 && all_pass(r) && worst <= 1e-6 + 1e-4;
  o.detail = "max violation=" + fmt(worst) + " <= 1e-6 + 1e-4 over " + std::to_string(r.size()) +
             " (bump, t) cells";
  return o;
}

Outcome variance_decomposition() {
  const auto& g = run_config("variance_gaussian.cfg");
  const auto& p = run_config("variance_phi4.cfg");
  const auto gm = g.rows("variance", "mismatch");
  const auto pm = p.rows("variance", "mismatch");
  const auto pt = p.rows("variance", "tail");
  Outcome o;
  if (gm.size() != 1 || pm.size() != 1 || pt.size() != 1) {
    o.pass = false;
    o.detail = "missing variance rows";
    return o;
  }
  o.pass = gm[0].value <= 1e-6 && pm[0].value <= 1e-3 && pt[0].value < 1e-4 &&
           all_pass(g.rows("variance", "")) && all_pass(p.rows("variance", ""));
  o.detail = "gaussian mismatch=" + fmt(gm[0].value) + " <= 1e-6, phi4 mismatch=" + fmt(pm[0].value) +
             " <= 1e-3, phi4 tail=" + fmt(pt[0].value) + " < 1e-4";
  return o;
}

Outcome poincare_bound() {
  std::string detail;
  bool ok = true;
  for (const char* cfg : {"gaussian_chain.cfg", "phi4_double_well.cfg"}) {
    const auto r = run_config(cfg).rows("theorem", "poincare-bound");
    std::vector<double> s;
    double ratio = 0.0;
    for (const auto& row : r) {
      if (row.item != "poincare-bound") continue;
      s.push_back(row.s);
      ratio = std::max(ratio, row.value / row.bound);
    }
    ok = ok && all_pass(r) && s == std::vector<double>{0.0, 0.5, 1.0};
    detail += std::string(detail.empty() ? "" : ", ") + cfg + " max C_P/bound=" + fmt(ratio);
  }
  Outcome o;
  o.pass = ok;
  o.detail = detail + " (s in {0, 0.5, 1}, each <= 1)";
  return o;
}

Outcome heatflow() {
  const auto mono = run_config("heatflow_uniform.cfg").rows("heatflow", "monotone");
  const auto ref = run_config("heatflow_gaussian.cfg").rows("heatflow", "gaussian-reference");
  double dec = mono.empty() ? INFINITY : mono[0].value;
  double err = 0.0;
  for (const auto& r : ref) err = std::max(err, r.value);
  Outcome o;
  o.pass = mono.size() == 1 && dec <= 1e-4 && ref.size() == 21 && err <= 2e-3;
  o.detail = "uniform max decrease=" + fmt(dec) + " <= 1e-4, gaussian max|C_P/(1+s) - 1|=" + fmt(err) +
             " <= 2e-3";
  return o;
}

Outcome bochner() {
  const auto sch = CovarianceSchedule::pauli_villars(Matrix::Identity(1, 1));
  const auto v0 = PotentialDescriptor::phi4_site_sum(1.0, -1.0, Vector::Zero(1));
  const std::vector<std::pair<const char*, std::function<double(double)>>> fns{
      {"x^2", [](double x) { return x * x; }},
      {"x^3 - x", [](double x) { return x * x * x - x; }},
      {"sin", [](double x) { return std::sin(x); }},
      {"tanh", [](double x) { return std::tanh(2.0 * x); }},
      {"gaussian", [](double x) { return std::exp(-(x - 0.3) * (x - 0.3)); }}};
  double worst = 0.0;
  int cells = 0;
  for (double t : {0.0, 0.5, 2.0}) {
    // One box for both drifts: the reversible weight of L, exp(-2 V_t), is
    // wider than the nu_t box at later times.
    const FlowMeasure nu(sch, v0, t, Grid(Box::cube(1, 8.0), {1025}));
    for (const auto& [name, f] : fns) {
      const auto phi = sample_on_grid(nu.grid(), [&f](const Vector& y) { return f(y(0)); });
      for (auto d : {Drift::ScriptL, Drift::L}) {
        worst = std::max(worst, gamma_operators(nu, nu.covariance().cprime, d, phi).relative_error);
        ++cells;
      }
    }
  }
  Outcome o;
  o.pass = cells == 30 && worst <= 1e-5;
  o.detail = "max relative |composition - explicit|=" + fmt(worst) + " <= 1e-5 over " +
             std::to_string(cells) + " (function, t, drift) cells";
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const auto cfg = load_config(config_path("phi4_double_well.cfg"));
  const fs::path base = fs::temp_directory_path() / "rgflow-acceptance";
  fs::remove_all(base);
  emit_report(run_config("phi4_double_well.cfg").report, (base / "a").string());
  emit_report(run_experiment(cfg), (base / "b").string());
  int files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(base / "a")) {
    ++files;
    if (slurp(e.path()) != slurp(base / "b" / e.path().filename())) ++differ;
  }
  fs::remove_all(base);
  Outcome o;
  o.pass = files == 7 && differ == 0;
  o.detail = std::to_string(files - differ) + "/" + std::to_string(files) +
             " output files byte-identical across two runs (seed " + std::to_string(cfg.seed) + ")";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Gaussian equality chain", gaussian_chain},
      {"OU spectrum oracle", ou_spectrum},
      {"quadratic closed form", quadratic_closed_form},
      {"phi4 Hessian identity", hessian_identity},
      {"phi4 criterion certification", criterion_certification},
      {"main theorem at desk scale", main_theorem},
      {"intertwining", intertwining},
      {"variance decomposition", variance_decomposition},
      {"Poincare upper bound", poincare_bound},
      {"heat-flow harness", heatflow},
      {"Gamma_2 Bochner identity", bochner},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2zu  %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria pass\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

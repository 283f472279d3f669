#include "rgflow/experiment.hpp"

#include "rgflow/curvature.hpp"
#include "rgflow/flow.hpp"
#include "rgflow/heatflow.hpp"
#include "rgflow/phi4.hpp"
#include "rgflow/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

namespace rgflow {
namespace {

constexpr double kRichardsonTolerance = 5e-3;
constexpr double kTimeMatch = 1e-12;

std::string sci(double v) { return format_double(v); }

CheckRow row(const std::string& check, const std::string& item) {
  CheckRow r;
  r.check = check;
  r.item = item;
  return r;
}

// value <= bound + tolerance
CheckRow upper(const std::string& check, const std::string& item, double value, double bound,
               double tol) {
  CheckRow r = row(check, item);
  r.value = value;
  r.bound = bound;
  r.margin = bound - value;
  r.tolerance = tol;
  r.status = r.margin >= -tol ? Status::Pass : Status::Fail;
  return r;
}

// value >= bound - tolerance
CheckRow lower(const std::string& check, const std::string& item, double value, double bound,
               double tol) {
  CheckRow r = upper(check, item, -value, -bound, tol);
  r.value = value;
  r.bound = bound;
  return r;
}

std::vector<double> merge_times(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  std::vector<double> out;
  for (double t : a) {
    if (out.empty() || t - out.back() > kTimeMatch) out.push_back(t);
  }
  return out;
}

double density_uniform(double) { return 0.5; }
double density_gaussian(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double density_bimodal(double x) {
  const double s = 0.5;
  const double norm = 1.0 / (s * std::sqrt(2.0 * std::numbers::pi));
  const double a = (x - 2.0) / s;
  const double b = (x + 2.0) / s;
  return 0.5 * norm * (std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b));
}

class Experiment {
 public:
  explicit Experiment(const ExperimentConfig& c) : cfg_(c) {
    trace_times_ = cfg_.t_grid.materialize();
    if (cfg_.model.kind == "phi4") {
      phi4_.emplace();
      phi4_->a = cfg_.model.a;
      phi4_->g = cfg_.model.g;
      phi4_->nu = cfg_.model.nu;
      phi4_->h = cfg_.model.h;
    }
  }

  RunReport run() {
    report_.version = kVersion;
    report_.config_echo = cfg_.echo();
    report_.phi4_columns = phi4_.has_value() && cfg_.wants("criterion");

    // Schedules feed the margins, so criterion runs first; the rest follow
    // the canonical order.
    const std::vector<std::pair<std::string, std::function<void()>>> plan{
        {"criterion", [this] { check_criterion(); }},
        {"spectrum", [this] { check_spectrum(); }},
        {"theorem", [this] { check_theorem(); }},
        {"higher-k", [this] { check_higher_k(); }},
        {"intertwining", [this] { check_intertwining(); }},
        {"variance", [this] { check_variance(); }},
        {"phi4-identity", [this] { check_phi4_identity(); }},
        {"heatflow", [this] { check_heatflow(); }},
    };
    for (const auto& [name, body] : plan) {
      if (!cfg_.wants(name)) continue;
      guarded(name, body);
    }
    emit_schedule();
    emit_spectra();
    return std::move(report_);
  }

 private:
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const ConvergenceError& e) {
      CheckRow r = row(name, "error");
      r.status = Status::Unconverged;
      r.note = e.what();
      report_.checks.push_back(r);
    } catch (const std::exception& e) {
      CheckRow r = row(name, "error");
      r.status = Status::Fail;
      r.note = e.what();
      report_.checks.push_back(r);
    }
  }

  void add(CheckRow r) { report_.checks.push_back(std::move(r)); }

  // ---- shared state ---------------------------------------------------------

  const CovarianceSchedule& schedule() {
    if (!schedule_) {
      const auto& s = cfg_.schedule;
      if (phi4_) {
        phi4_->validate();
        schedule_.emplace(phi4_->schedule());
      } else if (s.kind == ScheduleKind::CustomTable) {
        schedule_.emplace(
            CovarianceSchedule::custom_table(s.c_infinity, load_covariance_table(s.table)));
      } else {
        schedule_.emplace(make_schedule(s.kind, s.c_infinity));
      }
    }
    return *schedule_;
  }

  const PotentialDescriptor& potential() {
    if (!v0_) {
      const auto& m = cfg_.model;
      const int d = static_cast<int>(schedule().dim());
      if (phi4_) {
        v0_.emplace(phi4_->potential());
      } else if (m.kind == "quadratic") {
        v0_.emplace(PotentialDescriptor::quadratic(m.b));
      } else if (m.kind == "custom-poly") {
        v0_.emplace(PotentialDescriptor::polynomial(m.quartic, m.quadratic, m.linear));
      } else {
        v0_.emplace(PotentialDescriptor::zero(d));
      }
    }
    return *v0_;
  }

  const Grid& spectral_grid() {
    if (!grid_) {
      const int d = schedule().dim();
      Box box;
      if (cfg_.box_half_width) {
        box = Box::cube(d, *cfg_.box_half_width);
      } else {
        double tmin = trace_times_.front();
        for (double s : cfg_.poincare_s) tmin = std::min(tmin, s);
        box = default_flow_box(schedule(), tmin, 8.0);
      }
      grid_.emplace(box, std::vector<int>(static_cast<std::size_t>(d), cfg_.grid_points));
    }
    return *grid_;
  }

  // weighted: mobility C_t' (the flow's own metric); unweighted: identity.
  const SpectralResult& spectral(double t, bool weighted) {
    const auto key = std::make_pair(weighted ? 0 : 1, t);
    auto it = spectra_.find(key);
    if (it != spectra_.end()) return it->second;
    const FlowMeasure flow(schedule(), potential(), t, spectral_grid(), cfg_.quadrature_order);
    const int d = schedule().dim();
    const Matrix mobility = weighted ? flow.covariance().cprime : Matrix(Matrix::Identity(d, d));
    const auto gen = build_generator(flow, mobility, Drift::ScriptL, true);
    return spectra_.emplace(key, spectrum(gen, cfg_.eigen_count)).first->second;
  }

  CurvatureOptions curvature_options() const {
    CurvatureOptions o;
    o.order = cfg_.quadrature_order;
    o.per_axis = cfg_.curvature_per_axis;
    o.random_points = cfg_.curvature_random;
    o.refine_steps = cfg_.curvature_refine_steps;
    o.subdivisions = cfg_.curvature_subdivisions;
    o.seed = cfg_.seed;
    return o;
  }

  Phi4Options phi4_options() const {
    Phi4Options o;
    o.seed = cfg_.seed;
    return o;
  }

  std::vector<double> positive_trace_times() const {
    std::vector<double> out;
    for (double t : trace_times_) {
      if (t > 0.0) out.push_back(t);
    }
    return out;
  }

  std::vector<double> intertwining_times() const {
    return cfg_.intertwining_times.empty() ? positive_trace_times() : cfg_.intertwining_times;
  }

  std::vector<double> poincare_times() const {
    return cfg_.poincare_s.empty() ? std::vector<double>{trace_times_.front()} : cfg_.poincare_s;
  }

  // One schedule covers every time any check asks about.
  const CurvatureSchedule& curvature() {
    if (!curv_) {
      std::vector<double> times = trace_times_;
      if (cfg_.wants("intertwining")) times = merge_times(times, intertwining_times());
      if (cfg_.wants("theorem")) times = merge_times(times, poincare_times());
      curv_.emplace(curvature_schedule(schedule(), potential(), times, curvature_options()));
    }
    return *curv_;
  }

  // ---- checks ---------------------------------------------------------------

  void check_criterion() {
    const auto& curv = curvature();
    for (double t : trace_times_) {
      const std::size_t i = curv.index_of(t);
      CheckRow r = row("criterion", "lambda-prime");
      r.t = t;
      r.value = curv.lambda_prime[i];
      r.note = "admissible on " + curv.sample_spec;
      add(r);
      CheckRow a = row("criterion", "alpha-prime");
      a.t = t;
      a.value = curv.alpha_prime[i];
      a.note = "lower bound on the supremum";
      add(a);
    }
    CheckRow ref = upper("criterion", "refinement", curv.refinement_change, 0.0, 1e-4);
    ref.note = "lambda_t against the half-resolution time grid";
    if (ref.status == Status::Fail) {
      // Only the margins consume the integrals.
      const bool used = cfg_.wants("theorem") || cfg_.wants("higher-k") || cfg_.wants("intertwining");
      ref.status = used ? Status::Unconverged : Status::Pass;
      if (!used) ref.note += "; integrals unused by the requested checks";
    }
    add(ref);

    if (!phi4_) return;
    const auto points = phi4_schedules(*phi4_, positive_trace_times(), phi4_options(),
                                       curvature_options());
    for (const auto& p : points) {
      const std::size_t i = curv.index_of(p.t);
      CheckRow l = lower("criterion", "phi4-lambda", curv.lambda_prime[i], p.lambda_prime, 1e-6);
      l.t = p.t;
      l.note = "bound 1/t - chi/t^2, chi=" + sci(p.chi);
      add(l);
      CheckRow a = upper("criterion", "phi4-alpha", curv.alpha_prime[i], p.alpha_formula, 1e-8);
      a.t = p.t;
      a.note = "sigma_min=" + sci(p.sigma_min);
      add(a);
      phi4_points_[p.t] = p;
    }
  }

  void check_spectrum() {
    for (double t : trace_times_) {
      for (bool weighted : {true, false}) {
        const auto& sp = spectral(t, weighted);
        CheckRow r = row("spectrum", weighted ? "poincare-weighted" : "poincare-unweighted");
        r.t = t;
        r.value = sp.poincare_constant;
        r.tolerance = kRichardsonTolerance;
        r.status = sp.converged ? Status::Pass : Status::Unconverged;
        r.note = "richardson_change=" + sci(sp.richardson_change);
        add(r);
      }
    }
  }

  void pair_rows(const std::string& check, const std::vector<PairMargin>& margins,
                 const std::function<bool(const PairMargin&)>& converged,
                 const std::function<double(const PairMargin&)>& log_ratio) {
    for (const auto& m : margins) {
      CheckRow r = row(check, check == "theorem" ? "pair" : "pair-k");
      r.s = m.s;
      r.t = m.t;
      if (check != "theorem") r.k = m.k;
      r.value = log_ratio(m);
      r.bound = m.exponent;
      r.margin = m.margin;
      r.tolerance = cfg_.tolerance_total;
      if (m.margin < -cfg_.tolerance_total) {
        r.status = Status::Fail;
      } else if (!converged(m)) {
        r.status = Status::Unconverged;
        r.note = "spectrum unconverged";
      }
      add(r);
    }
  }

  void check_theorem() {
    const auto& curv = curvature();
    std::vector<double> cp;
    for (double t : trace_times_) cp.push_back(spectral(t, true).poincare_constant);
    const auto margins = theorem_margin(trace_times_, cp, curv);
    pair_rows(
        "theorem", margins,
        [this](const PairMargin& m) { return spectral(m.s, true).converged && spectral(m.t, true).converged; },
        [this](const PairMargin& m) {
          return std::log(spectral(m.s, true).poincare_constant) -
                 std::log(spectral(m.t, true).poincare_constant);
        });

    for (double s : poincare_times()) {
      const auto bound = poincare_upper_bound(curv, schedule().speed_radius(s), s);
      const auto& u = spectral(s, false);
      CheckRow r = upper("theorem", "poincare-bound", u.poincare_constant, bound.unweighted, 1e-6);
      r.s = s;
      r.note = "tail " + bound.tail_model + " " + sci(bound.tail);
      if (r.status == Status::Pass && !u.converged) r.status = Status::Unconverged;
      add(r);
      const auto& w = spectral(s, true);
      CheckRow q = upper("theorem", "poincare-bound-weighted", w.poincare_constant, bound.weighted, 1e-6);
      q.s = s;
      q.note = r.note;
      if (q.status == Status::Pass && !w.converged) q.status = Status::Unconverged;
      add(q);
    }

    const PolchinskiSemigroup sg(schedule(), potential(), cfg_.quadrature_order);
    const auto trace = rayleigh_flow_trace(sg, bump_function(cfg_.test_centers.front(), cfg_.test_radius),
                                           trace_times_);
    std::vector<double> times;
    std::vector<double> quotients;
    for (const auto& p : trace) {
      times.push_back(p.t);
      quotients.push_back(p.quotient);
    }
    const auto lemma = lemma_check(times, quotients, curv);
    add(upper("theorem", "lemma-pairs", lemma.max_pair_excess, 0.0, cfg_.tolerance_total));
    add(upper("theorem", "lemma-rate", lemma.max_rate_excess, 0.0, 1e-3));
  }

  void check_higher_k() {
    const auto& curv = curvature();
    std::vector<Vector> eig;
    for (double t : trace_times_) eig.push_back(spectral(t, true).eigenvalues);
    const auto margins = higher_eigenvalue_margin(trace_times_, eig, curv);
    pair_rows(
        "higher-k", margins,
        [this](const PairMargin& m) { return spectral(m.s, true).converged && spectral(m.t, true).converged; },
        [this](const PairMargin& m) {
          return std::log(spectral(m.t, true).eigenvalues(m.k)) -
                 std::log(spectral(m.s, true).eigenvalues(m.k));
        });
  }

  void check_intertwining() {
    const auto& curv = curvature();
    const PolchinskiSemigroup sg(schedule(), potential(), cfg_.quadrature_order);
    for (std::size_t c = 0; c < cfg_.test_centers.size(); ++c) {
      const auto f = bump_function(cfg_.test_centers[c], cfg_.test_radius);
      for (double t : intertwining_times()) {
        const auto rep = intertwining_check(sg, f, t, curv, cfg_.intertwining_points);
        CheckRow r = upper("intertwining", "bump-" + std::to_string(c), rep.max_violation, 0.0,
                           1e-6 + cfg_.intertwining_allowance);
        r.t = t;
        r.note = "max_lhs=" + sci(rep.max_lhs);
        add(r);
      }
    }
  }

  void check_variance() {
    const int d = schedule().dim();
    TestFunction f;
    if (cfg_.variance_function == "linear") {
      Vector a = Vector::Zero(d);
      a(0) = 1.0;
      f = linear_function(a);
    } else if (cfg_.variance_function == "gaussian-bump") {
      f = gaussian_bump(cfg_.variance_center, cfg_.variance_radius);
    } else {
      f = bump_function(cfg_.variance_center, cfg_.variance_radius);
    }
    std::vector<double> grid = cfg_.variance_grid.materialize();
    if (grid.front() > 0.0) grid.insert(grid.begin(), 0.0);
    ConservationOptions o;
    o.grid_points = cfg_.variance_grid_points;
    o.order = cfg_.quadrature_order;
    const auto rep = conservation_check(schedule(), potential(), f, grid, o);

    CheckRow m = upper("variance", "mismatch", rep.mismatch, 0.0, cfg_.variance_tolerance);
    m.t = grid.back();
    if (rep.tail_too_large) {
      if (m.status == Status::Pass) m.status = Status::Unconverged;
      m.note = "T too small";
    }
    add(m);
    CheckRow tail = upper("variance", "tail", rep.tail, 0.0, o.tail_threshold);
    tail.t = grid.back();
    if (tail.status == Status::Fail) {
      tail.status = Status::Unconverged;
      tail.note = "T too small";
    }
    add(tail);
    add(upper("variance", "mean-drift", rep.max_mean_drift, 0.0, o.mean_tolerance));
    CheckRow v = row("variance", "variance");
    v.value = rep.variance;
    v.bound = rep.integral + rep.tail;
    v.note = "integral=" + sci(rep.integral);
    add(v);
  }

  std::vector<Vector> identity_points(std::size_t index) const {
    const int n = phi4_->sites();
    std::mt19937_64 rng(cfg_.seed + index);
    std::uniform_real_distribution<double> u(-cfg_.phi4_sample_width, cfg_.phi4_sample_width);
    std::vector<Vector> out;
    for (int i = 0; i < cfg_.phi4_samples; ++i) {
      Vector x(n);
      for (int j = 0; j < n; ++j) x(j) = u(rng);
      out.push_back(x);
    }
    return out;
  }

  void check_phi4_identity() {
    if (!phi4_) throw ConfigError("phi4-identity needs a phi4 model");
    phi4_->validate();
    for (std::size_t k = 0; k < cfg_.phi4_times.size(); ++k) {
      const double t = cfg_.phi4_times[k];
      const auto phis = identity_points(k);
      const auto rep = hessian_identity_check(*phi4_, t, phis, phi4_options());
      CheckRow r = upper("phi4-identity", "hessian", rep.max_relative_error, 0.0, 1e-5);
      r.t = t;
      add(r);
      if (cfg_.phi4_mcmc && phi4_->sites() <= 3) {
        Phi4Options mc = phi4_options();
        mc.force_mcmc = true;
        const auto exact = tilted_covariance(*phi4_, t, rep.worst_phi, phi4_options());
        const auto sampled = tilted_covariance(*phi4_, t, rep.worst_phi, mc);
        double z = 0.0;
        for (Eigen::Index i = 0; i < exact.covariance.size(); ++i) {
          const double se = std::max(sampled.std_error.data()[i], 1e-12);
          z = std::max(z, std::abs(sampled.covariance.data()[i] - exact.covariance.data()[i]) / se);
        }
        CheckRow a = upper("phi4-identity", "mcmc-agreement", z, 5.0, 0.0);
        a.t = t;
        a.note = "max standardized deviation, ess=" + sci(sampled.min_ess);
        add(a);
      }
    }
  }

  void check_heatflow() {
    DensityTable table;
    const auto& kind = cfg_.heatflow_density;
    if (kind == "uniform") {
      table = tabulate_density(-1.0, 1.0, 2001, density_uniform);
    } else if (kind == "gaussian") {
      table = tabulate_density(-12.0, 12.0, 4801, density_gaussian);
    } else if (kind == "bimodal") {
      table = tabulate_density(-6.0, 6.0, 2401, density_bimodal);
    } else {
      table = load_density_table(cfg_.heatflow_table);
    }
    const auto s_grid = cfg_.heatflow_s.materialize();
    HeatflowOptions o;
    o.grid_points = cfg_.heatflow_grid_points;
    const auto trace = heatflow_harness(table, s_grid, o);

    for (std::size_t i = 0; i < trace.s.size(); ++i) {
      CheckRow r = row("heatflow", "poincare");
      r.s = trace.s[i];
      r.value = trace.poincare[i];
      r.status = trace.converged[i] ? Status::Pass : Status::Unconverged;
      add(r);
    }
    CheckRow mono = upper("heatflow", "monotone", trace.max_decrease, 0.0, o.monotone_tolerance);
    if (!trace.log_concave) {
      mono.status = Status::Pass;
      mono.note = "not log-concave; not asserted";
    }
    if (trace.renormalized) mono.note += (mono.note.empty() ? "" : "; ") + std::string("input mass ") + sci(trace.input_mass);
    add(mono);
    add(upper("heatflow", "deconvolution", trace.cp_mu_gamma1 - 1.0, trace.cp_mu, o.monotone_tolerance));
    if (kind == "gaussian") {
      for (std::size_t i = 0; i < trace.s.size(); ++i) {
        CheckRow r = upper("heatflow", "gaussian-reference",
                           std::abs(trace.poincare[i] / (1.0 + trace.s[i]) - 1.0), 2e-3, 0.0);
        r.s = trace.s[i];
        add(r);
      }
    }
  }

  // ---- tables ---------------------------------------------------------------

  void emit_schedule() {
    if (!curv_) return;
    for (std::size_t i = 0; i < curv_->t.size(); ++i) {
      ScheduleRow r;
      r.t = curv_->t[i];
      r.lambda_prime = curv_->lambda_prime[i];
      r.alpha_prime = curv_->alpha_prime[i];
      r.lambda_int = curv_->lambda_int[i];
      r.alpha_int = curv_->alpha_int[i];
      r.samples_used = curv_->samples_used[i];
      for (const auto& [t, p] : phi4_points_) {
        if (std::abs(t - r.t) <= kTimeMatch) {
          r.chi = p.chi;
          r.chi_stderr = p.chi_stderr;
          r.sigma_min = p.sigma_min;
        }
      }
      report_.schedule.push_back(r);
    }
  }

  void emit_spectra() {
    for (const auto& [key, sp] : spectra_) {
      SpectrumRow r;
      r.metric = key.first == 0 ? "weighted" : "unweighted";
      r.t = key.second;
      r.mu.assign(sp.eigenvalues.data(), sp.eigenvalues.data() + sp.eigenvalues.size());
      r.converged = sp.converged;
      report_.spectrum.push_back(r);
    }
  }

  const ExperimentConfig& cfg_;
  std::vector<double> trace_times_;
  std::optional<Phi4Model> phi4_;
  std::optional<CovarianceSchedule> schedule_;
  std::optional<PotentialDescriptor> v0_;
  std::optional<Grid> grid_;
  std::map<std::pair<int, double>, SpectralResult> spectra_;
  std::optional<CurvatureSchedule> curv_;
  std::map<double, Phi4SchedulePoint> phi4_points_;
  RunReport report_;
};

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report = Experiment(config).run();
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ExperimentConfig load_config_with_seed(const std::string& path, std::optional<long> seed) {
  ConfigTree tree = ConfigTree::load(path);
  if (seed) {
    if (*seed < 0) throw ConfigError("seed must be >= 0");
    tree.set("seed", std::to_string(*seed));
  }
  return parse_config(tree);
}

}  // namespace rgflow

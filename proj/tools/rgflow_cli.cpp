// Command-line front end: run | validate | oracle.

#include "rgflow/config.hpp"
#include "rgflow/experiment.hpp"
#include "rgflow/oracle.hpp"
#include "rgflow/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using rgflow::format_double;

// Reference values behind the derived test expectations, from the
// standard-library-only oracle.
std::string oracle_report() {
  namespace o = rgflow::oracle;
  std::ostringstream out;
  auto line = [&](const std::string& name, const std::string& params, double value) {
    out << "{\"oracle\":" << nlohmann::json(name).dump() << ",\"params\":" << params
        << ",\"value\":" << format_double(value) << "}\n";
  };

  const auto quad = o::gaussian_renormalized(1.0, 1.0, 1.0);
  line("quadratic-value", R"({"beta":1,"c":1,"x":1})", quad.value);
  line("quadratic-gradient", R"({"beta":1,"c":1,"x":1})", quad.gradient);
  line("quadratic-hessian", R"({"beta":1,"c":1,"x":1})", quad.hessian);

  const auto ou = o::sturm_liouville_richardson([](double x) { return -0.5 * x * x; }, -10.0, 10.0,
                                                1.0, 1025, 5);
  for (std::size_t k = 0; k < ou.size(); ++k) {
    line("ou-eigenvalue", "{\"k\":" + std::to_string(k) + ",\"nodes\":1025}", ou[k]);
  }

  // Single-site phi^4 with A = 1, g = 1, nu = 0: chi_t is the variance at
  // mass 1 + 1/t.
  for (double t : {0.5, 1.0, 2.0}) {
    const double a = 1.0 + 1.0 / t;
    const auto m = o::moments_1d([a](double y) { return 0.5 * a * y * y + 0.25 * y * y * y * y; },
                                 -12.0, 12.0);
    line("phi4-chi", "{\"t\":" + format_double(t) + "}", m.variance);
  }

  for (double t : {0.0, 0.5, 1.0}) {
    const auto h = o::heat_kernel_scalar(1.0, t);
    line("heat-kernel-cprime", "{\"t\":" + format_double(t) + "}", h.cprime);
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for the Polchinski renormalization flow"};
  app.set_version_flag("--version", std::string(rgflow::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<long> seed;
  auto* run = app.add_subcommand("run", "Run the checks of a config and write reports");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--seed", seed, "Seed (overrides the config)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and validate a config");
  validate->add_option("config", validate_path, "Config file")->required();

  std::optional<std::string> oracle_out;
  auto* oracle = app.add_subcommand("oracle", "Write reference values of the independent oracles");
  oracle->add_option("--out", oracle_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) {
      const auto cfg = rgflow::load_config(validate_path);
      std::cout << "config ok: " << cfg.checks.size() << " checks\n";
      return 0;
    }
    if (*oracle) {
      const std::string text = oracle_report();
      if (oracle_out) {
        std::ofstream f(*oracle_out, std::ios::binary);
        f << text;
        if (!f) throw std::runtime_error("cannot write '" + *oracle_out + "'");
      } else {
        std::cout << text;
      }
      return 0;
    }

    rgflow::ExperimentConfig cfg;
    try {
      cfg = rgflow::load_config_with_seed(config_path, seed);
    } catch (const rgflow::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    const auto report = rgflow::run_experiment(cfg);
    const std::string dir = out_dir ? *out_dir : cfg.output;
    rgflow::emit_report(report, dir);
    int pass = 0, fail = 0, unconverged = 0;
    for (const auto& r : report.checks) {
      if (r.status == rgflow::Status::Pass) ++pass;
      if (r.status == rgflow::Status::Fail) ++fail;
      if (r.status == rgflow::Status::Unconverged) ++unconverged;
    }
    std::cerr << rgflow::kVersion << ": " << pass << " pass, " << fail << " fail, " << unconverged
              << " unconverged; wall clock " << report.wall_clock_seconds << " s; reports in "
              << dir << "\n";
    return report.exit_code();
  } catch (const rgflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#include "rgflow/config.hpp"
#include "rgflow/experiment.hpp"
#include "rgflow/report.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

using namespace rgflow;

namespace {

ExperimentConfig from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(ConfigTree::parse(in, "<test>"));
}

const char* kGaussian =
    "model.kind = gaussian\n"
    "schedule.kind = heat-kernel\n"
    "schedule.c_infinity = 1\n"
    "t_grid.values = [0, 0.5, 1, 1.5, 2]\n"
    "discretization.grid_points = 257\n";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("rgflow-test-" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config values") {
  std::istringstream in(
      "# comment\n"
      "a = 1.5  # trailing\n"
      "b = [1, 2,\n"
      "     3]\n"
      "c = [[1, 0.5], [0.5, 2]]\n"
      "d = \"quoted, text\"\n"
      "e = true\n");
  const auto tree = ConfigTree::parse(in);
  CHECK(tree.get_double("a") == 1.5);
  CHECK(tree.get_vector("b") == std::vector<double>{1, 2, 3});
  const Matrix c = tree.get_matrix("c");
  CHECK(c(0, 1) == 0.5);
  CHECK(c(1, 1) == 2.0);
  CHECK(tree.get_string("d") == "quoted, text");
  CHECK(tree.get_bool("e"));
  CHECK(tree.get_matrix("a")(0, 0) == 1.5);
  CHECK_THROWS_AS(tree.get_double("missing"), ConfigError);
  CHECK(tree.get_int("missing", 4) == 4);
  CHECK_THROWS_AS(tree.get_int("a"), ConfigError);

  std::istringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_WITH_AS(ConfigTree::parse(dup), doctest::Contains("duplicate"), ConfigError);
  std::istringstream open("a = [1, 2\n");
  CHECK_THROWS_AS(ConfigTree::parse(open), ConfigError);
}

TEST_CASE("unknown check names are rejected at validation") {
  CHECK_THROWS_WITH_AS(from_text(std::string(kGaussian) + "checks = [theorem, wavelets]\n"),
                       doctest::Contains("wavelets"), ConfigError);
}

TEST_CASE("time grids") {
  TimeGridSpec g;
  g.min = 0.1;
  g.max = 10.0;
  g.count = 3;
  g.spacing = "log";
  const auto v = g.materialize();
  REQUIRE(v.size() == 3);
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(from_text(std::string(kGaussian) + "checks = []\nt_grid.values2 = 1\n"), ConfigError);
}

TEST_CASE("empty checks give a header-only checks table") {
  const auto cfg = from_text(std::string(kGaussian) + "checks = []\n");
  const auto report = run_experiment(cfg);
  CHECK(report.checks.empty());
  CHECK(checks_csv(report) == "check,item,s,t,k,value,bound,margin,tolerance,status,note\n");
  CHECK(report.exit_code() == 0);
}

TEST_CASE("theorem on five trace times gives ten pair rows") {
  const auto cfg = from_text(std::string(kGaussian) + "checks = [spectrum, theorem]\n");
  const auto report = run_experiment(cfg);
  int pairs = 0;
  for (const auto& r : report.checks) {
    if (r.check == "theorem" && r.item == "pair") {
      ++pairs;
      CHECK(r.s < r.t);
      CHECK(std::abs(r.margin) < 2e-3);
    }
    CHECK(r.status == Status::Pass);
  }
  CHECK(pairs == 10);
  CHECK(report.exit_code() == 0);
}

TEST_CASE("json lines write null for missing fields") {
  RunReport r;
  CheckRow row;
  row.check = "spectrum";
  row.item = "info";
  row.value = 0.25;
  r.checks.push_back(row);
  const std::string line = checks_jsonl(r);
  CHECK(line.find("\"s\":null") != std::string::npos);
  CHECK(line.find("\"k\":null") != std::string::npos);
  CHECK(line.find("\"value\":0.25") != std::string::npos);
  const std::string csv = checks_csv(r);
  CHECK(csv.find("spectrum,info,,,,0.25,") != std::string::npos);
}

TEST_CASE("exit codes") {
  RunReport r;
  r.checks.resize(2);
  CHECK(r.exit_code() == 0);
  r.checks[0].status = Status::Unconverged;
  CHECK(r.exit_code() == 3);
  r.checks[1].status = Status::Fail;
  CHECK(r.exit_code() == 1);
}

TEST_CASE("reruns are byte-identical") {
  const auto cfg = from_text(std::string(kGaussian) + "checks = [criterion, spectrum, theorem]\nseed = 9\n");
  const auto a = scratch("a");
  const auto b = scratch("b");
  emit_report(run_experiment(cfg), a.string());
  emit_report(run_experiment(cfg), b.string());
  for (const char* f : {"checks.csv", "checks.jsonl", "schedule.csv", "schedule.jsonl",
                        "spectrum.csv", "spectrum.jsonl", "config.echo"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    CHECK(!slurp(a / f).empty());
  }
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("unwritable output path is reported") {
  const auto blocker = scratch("blocker");
  std::ofstream(blocker) << "file, not a directory\n";
  const std::string dir = (blocker / "sub").string();
  CHECK_THROWS_WITH_AS(emit_report(RunReport{}, dir), doctest::Contains(dir.c_str()), std::runtime_error);
  std::filesystem::remove(blocker);
}

TEST_CASE("seed override reaches the config and its echo") {
  const auto path = scratch("seed.cfg");
  std::ofstream(path) << kGaussian << "checks = []\nseed = 3\n";
  const auto cfg = load_config_with_seed(path.string(), 41);
  CHECK(cfg.seed == 41);
  CHECK(cfg.echo().find("seed = 41") != std::string::npos);
  CHECK(load_config_with_seed(path.string(), std::nullopt).seed == 3);
  std::filesystem::remove(path);
}

#include <doctest.h>

#include <json.hpp>

#include "signscan/csv.hpp"
#include "signscan/simulate.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace signscan;
using json = nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path work_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "signscan_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

RunResult run_cli(const std::string& args) {
  const auto out_path = work_dir() / "stdout.txt";
  const auto err_path = work_dir() / "stderr.txt";
  const std::string cmd = std::string(SIGNSCAN_BIN) + " " + args + " > " + out_path.string() +
                          " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

// A small F_V cache shared by the CLI invocations below keeps runs fast.
std::string fv_flags() {
  static const std::string flags = [] {
    const auto path = work_dir() / "fv_small.bin";
    std::ostringstream os;
    os << "--fv-cache " << path.string() << " --fv-grid 200 --fv-reps 4000";
    return os.str();
  }();
  return flags;
}

std::string make_change_csv(const std::string& name, double delta) {
  ScenarioSpec spec;
  spec.n = 120;
  spec.p = 10;
  spec.seed = 99;
  if (delta > 0.0) {
    spec.tau = 60;
    spec.delta = delta;
  }
  const auto path = (work_dir() / name).string();
  write_csv(generate(spec), path);
  return path;
}

void check_outcome_schema(const json& outcome, bool spatial) {
  CHECK(outcome.at("method").is_string());
  CHECK(outcome.at("gamma").is_number());
  CHECK(outcome.at("statistic").is_number());
  CHECK(outcome.at("standardized").is_number());
  CHECK(outcome.at("p_value").is_number());
  CHECK(outcome.contains("k_argmax"));
  CHECK(outcome.at("converged").is_boolean());
  if (spatial) {
    const json& nuis = outcome.at("nuisances");
    CHECK(nuis.at("zeta1").is_number());
    CHECK(nuis.at("tr_r2").is_number());
    CHECK(nuis.at("d_hat").is_array());
    CHECK(nuis.at("fit_front").at("converged").is_boolean());
    CHECK(nuis.at("fit_back").at("iterations").is_number());
  }
}

}  // namespace

TEST_CASE("missing file exits 2 with a diagnostic") {
  const RunResult result = run_cli("test --csv /no/such/file.csv");
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("input error") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli("test").exit_code == 2);                        // missing --csv
  CHECK(run_cli("simulate --reps 0 --n 50 --p 5").exit_code == 2);
  CHECK(run_cli("nonsense").exit_code == 2);
}

TEST_CASE("adaptive test report matches the documented schema") {
  const std::string csv = make_change_csv("null.csv", 0.0);
  const RunResult result =
      run_cli("test --csv " + csv + " --method scms --gamma 0 " + fv_flags());
  REQUIRE(result.exit_code == 0);
  const json report = json::parse(result.out);
  CHECK(report.at("tool") == "signscan");
  CHECK(report.at("version").is_string());
  CHECK(report.at("command") == "test");
  CHECK(report.at("config").at("lambda").is_number());
  REQUIRE(report.at("outcomes").size() == 1);
  const json& combined = report["outcomes"][0];
  check_outcome_schema(combined, true);
  const double p = combined["p_value"].get<double>();
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);
  REQUIRE(combined.at("components").size() == 2);
  check_outcome_schema(combined["components"][0], true);
  check_outcome_schema(combined["components"][1], true);
}

TEST_CASE("a strong change is detected and located") {
  const std::string csv = make_change_csv("change.csv", 20.0);
  const RunResult result = run_cli("test --csv " + csv + " --method smax --gamma 0");
  REQUIRE(result.exit_code == 0);
  const json report = json::parse(result.out);
  const json& outcome = report["outcomes"][0];
  CHECK(outcome["p_value"].get<double>() < 0.05);
  CHECK(std::abs(outcome["k_argmax"].get<double>() - 60.0) <= 10.0);
}

TEST_CASE("calibration-undefined inputs exit 3") {
  // p=1 with lambda/n = 0.25 makes p*log(h_n) < e for the gamma=0.5 formula.
  ScenarioSpec spec;
  spec.n = 40;
  spec.p = 1;
  spec.seed = 5;
  const auto path = (work_dir() / "univariate.csv").string();
  write_csv(generate(spec), path);
  const RunResult result =
      run_cli("test --csv " + path + " --method smax --gamma 0.5 --boundary-frac 0.25");
  CHECK(result.exit_code == 3);
  CHECK(result.err.find("calibration") != std::string::npos);
}

TEST_CASE("segment command reports recovered changepoints") {
  ScenarioSpec spec;
  spec.n = 300;
  spec.p = 8;
  spec.seed = 12;
  Matrix values = generate(spec).values;
  const double step = std::sqrt(8.0 / 8.0);
  for (Index i = 100; i < 300; ++i) values.row(i).array() += step;
  for (Index i = 200; i < 300; ++i) values.row(i).array() += step;
  const auto path = (work_dir() / "two_changes.csv").string();
  write_csv(DataMatrix::from_values(std::move(values)), path);

  const RunResult result =
      run_cli("segment --csv " + path + " --variant 0.5 --lambda-abs 40");
  REQUIRE(result.exit_code == 0);
  const json report = json::parse(result.out);
  REQUIRE(report.at("changepoints").is_array());
  CHECK(report["changepoints"].size() >= 2);
  bool near1 = false, near2 = false;
  for (const auto& cp : report["changepoints"]) {
    near1 = near1 || std::abs(cp.get<double>() - 100.0) <= 25.0;
    near2 = near2 || std::abs(cp.get<double>() - 200.0) <= 25.0;
  }
  CHECK(near1);
  CHECK(near2);
  for (const auto& det : report["detections"]) {
    CHECK(det.at("p_combined").get<double>() <= 0.05);
  }
}

TEST_CASE("segment handles long low-dimensional sequences with lambda 40") {
  ScenarioSpec spec;
  spec.n = 2215;
  spec.p = 43;
  spec.seed = 77;
  Matrix values = generate(spec).values;
  for (Index i = 1100; i < 2215; ++i) values.row(i).array() += 0.6;
  const auto path = (work_dir() / "long_sequence.csv").string();
  write_csv(DataMatrix::from_values(std::move(values)), path);
  const RunResult result =
      run_cli("segment --csv " + path + " --variant 0.5 --lambda-abs 40");
  REQUIRE(result.exit_code == 0);
  const json report = json::parse(result.out);
  CHECK(report.at("config").at("lambda") == 40);
  bool near = false;
  for (const auto& cp : report["changepoints"]) {
    near = near || std::abs(cp.get<double>() - 1100.0) <= 60.0;
  }
  CHECK(near);
}

TEST_CASE("simulate emits identical CSV bytes for identical seeds") {
  const std::string args = "simulate --scenario I --n 60 --p 6 --reps 5 --methods scms0 "
                           "--seed 42 --threads 2 " + fv_flags();
  const RunResult a = run_cli(args);
  const RunResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("kind,method,scenario") == 0);
}

TEST_CASE("fv command round-trips its cache and orders quantiles") {
  const auto path = (work_dir() / "fv_cmd.bin").string();
  const RunResult result =
      run_cli("fv --grid 200 --reps 4000 --seed 7 --out " + path);
  REQUIRE(result.exit_code == 0);
  const FVTable table = load_fv_table(path);
  CHECK(table.grid == 200);
  CHECK(table.reps == 4000);
  CHECK(table.quantile(0.90) <= table.quantile(0.95));
  CHECK(table.quantile(0.95) <= table.quantile(0.99));
  // run again against the same cache; quantile lines must match exactly
  const RunResult again =
      run_cli("fv --grid 200 --reps 4000 --seed 7 --out " + path);
  CHECK(again.out == result.out);
}

#include <CLI11.hpp>
#include <json.hpp>

#include "signscan/csv.hpp"
#include "signscan/inference.hpp"
#include "signscan/parallel.hpp"
#include "signscan/segment.hpp"
#include "signscan/simulate.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using json = nlohmann::json;
using namespace signscan;

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kDefaultFvSeed = 20240101;

struct FvOptions {
  std::string cache_path;
  int grid = ScanConfig{}.mc_grid;
  long reps = ScanConfig{}.mc_reps;
  std::uint64_t seed = kDefaultFvSeed;
  int threads = 0;
};

std::filesystem::path default_cache_dir() {
  if (const char* dir = std::getenv("SIGNSCAN_CACHE_DIR")) return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME")) {
    return std::filesystem::path(xdg) / "signscan";
  }
  if (const char* home = std::getenv("HOME")) {
    return std::filesystem::path(home) / ".cache" / "signscan";
  }
  return std::filesystem::temp_directory_path() / "signscan";
}

// Loads the table from the cache when present, otherwise simulates and caches.
FVTable obtain_fv_table(const FvOptions& opts) {
  std::filesystem::path path;
  if (!opts.cache_path.empty()) {
    path = opts.cache_path;
  } else {
    std::ostringstream name;
    name << "fv_nd" << opts.grid << "_b" << opts.reps << "_s" << opts.seed << ".bin";
    path = default_cache_dir() / name.str();
  }
  if (std::filesystem::exists(path)) {
    return load_fv_table(path.string());
  }
  std::cerr << "signscan: building F_V table (grid=" << opts.grid << ", reps=" << opts.reps
            << ", seed=" << opts.seed << ") -> " << path.string() << "\n";
  const FVTable table = simulate_fv(opts.grid, opts.reps, opts.seed, opts.threads);
  std::filesystem::create_directories(path.parent_path());
  save_fv_table(table, path.string());
  return table;
}

json fit_to_json(const HRFit& fit) {
  return json{{"iterations", fit.iterations},
              {"residual_sign", fit.residual_sign},
              {"residual_diag", fit.residual_diag},
              {"converged", fit.converged}};
}

json outcome_to_json(const TestOutcome& out) {
  json j{{"method", method_name(out.method)},
         {"gamma", out.gamma},
         {"statistic", out.statistic},
         {"standardized", out.standardized},
         {"p_value", out.p_value},
         {"converged", out.converged}};
  if (out.k_argmax) {
    j["k_argmax"] = *out.k_argmax;
  } else {
    j["k_argmax"] = nullptr;
  }
  if (out.nuisances) {
    const NuisanceEstimates& nuis = *out.nuisances;
    json d_hat = json::array();
    for (Index i = 0; i < nuis.D_hat.size(); ++i) d_hat.push_back(nuis.D_hat[i]);
    j["nuisances"] = json{{"zeta1", nuis.zeta1_hat},
                          {"tr_r2", nuis.trR2_hat},
                          {"d_hat", std::move(d_hat)},
                          {"fit_front", fit_to_json(nuis.fit_front)},
                          {"fit_back", fit_to_json(nuis.fit_back)}};
  } else {
    j["nuisances"] = nullptr;
  }
  return j;
}

json config_to_json(const ScanConfig& cfg, Index n, Index p) {
  json j{{"n", n},
         {"p", p},
         {"boundary_fraction", cfg.boundary_fraction},
         {"trim_fraction", cfg.trim_fraction},
         {"hr_tolerance", cfg.hr_tolerance},
         {"hr_max_iter", cfg.hr_max_iter},
         {"alpha", cfg.alpha},
         {"seed", cfg.seed},
         {"lambda", boundary_lambda(cfg, n)}};
  if (cfg.lambda_cap) j["lambda_cap"] = *cfg.lambda_cap;
  return j;
}

json report_shell(const std::string& command) {
  return json{{"tool", "signscan"}, {"version", kVersion}, {"command", command}};
}

void add_config_flags(CLI::App* cmd, ScanConfig& cfg) {
  cmd->add_option("--boundary-frac", cfg.boundary_fraction,
                  "Boundary removal fraction (lambda = floor(frac*n))")
      ->check(CLI::Range(1e-9, 0.4999));
  cmd->add_option("--rho-trim", cfg.trim_fraction, "Trimmed-segment fraction for nuisances")
      ->check(CLI::Range(1e-9, 0.4999));
  cmd->add_option("--alpha", cfg.alpha, "Significance level")->check(CLI::Range(1e-12, 0.9999));
  cmd->add_option("--seed", cfg.seed, "Seed echoed into reports");
  cmd->add_option("--tol", cfg.hr_tolerance, "Fixed-point solver tolerance");
  cmd->add_option("--max-iter", cfg.hr_max_iter, "Fixed-point solver iteration cap");
}

void add_fv_flags(CLI::App* cmd, FvOptions& fv) {
  cmd->add_option("--fv-cache", fv.cache_path, "F_V table cache file (built when missing)");
  cmd->add_option("--fv-grid", fv.grid, "F_V grid size N_d")->check(CLI::Range(2, 1000000));
  cmd->add_option("--fv-reps", fv.reps, "F_V Monte Carlo replications")
      ->check(CLI::Range(1000L, 100000000L));
  cmd->add_option("--fv-seed", fv.seed, "F_V sampling seed");
}

int run_test(const std::string& csv_path, bool has_header, const std::string& method,
             double gamma, ScanConfig cfg, const FvOptions& fv_opts, bool pretty) {
  const DataMatrix data = load_csv(csv_path, has_header);
  validate_config(cfg, data.n());

  json report = report_shell("test");
  report["input"] = json{{"path", csv_path}, {"has_header", has_header}};
  report["config"] = config_to_json(cfg, data.n(), data.p());
  json outcomes = json::array();

  const bool needs_fv = (method == "scms" || method == "ssum") && gamma == 0.0;
  std::optional<FVTable> fv;
  if (needs_fv) fv = obtain_fv_table(fv_opts);
  const FVTable* fv_ptr = fv ? &*fv : nullptr;

  if (method == "scms") {
    const AdaptiveOutcome out =
        adaptive_test(data, cfg, gamma == 0.0 ? Variant::GAMMA0 : Variant::GAMMA05, fv_ptr);
    json combined = outcome_to_json(out.combined);
    combined["components"] = json::array({outcome_to_json(out.linf), outcome_to_json(out.l2)});
    outcomes.push_back(std::move(combined));
  } else if (method == "smax") {
    const NuisanceEstimates nuis = nuisance_estimates(data, cfg);
    outcomes.push_back(outcome_to_json(max_linf_test(data, nuis, gamma, cfg)));
  } else if (method == "ssum") {
    const NuisanceEstimates nuis = nuisance_estimates(data, cfg);
    outcomes.push_back(outcome_to_json(max_l2_test(data, nuis, gamma, cfg, fv_ptr)));
  } else if (method == "mean") {
    outcomes.push_back(outcome_to_json(mean_baseline_test(data, gamma, cfg)));
  } else {
    throw InputError("unknown method: " + method);
  }
  report["outcomes"] = std::move(outcomes);
  std::cout << (pretty ? report.dump(2) : report.dump()) << "\n";
  return 0;
}

int run_segment(const std::string& csv_path, bool has_header, ScanConfig cfg,
                SegmentOptions opts, const FvOptions& fv_opts, bool pretty) {
  const DataMatrix data = load_csv(csv_path, has_header);
  std::optional<FVTable> fv;
  if (opts.variant == Variant::GAMMA0) fv = obtain_fv_table(fv_opts);
  const SegmentationResult result = binary_segment(data, cfg, opts, fv ? &*fv : nullptr);

  ScanConfig echo_cfg = cfg;  // the lambda actually used on the top interval
  echo_cfg.lambda_cap = opts.lambda_abs;
  json report = report_shell("segment");
  report["input"] = json{{"path", csv_path}, {"has_header", has_header}};
  report["config"] = config_to_json(echo_cfg, data.n(), data.p());
  report["config"]["lambda_abs"] = opts.lambda_abs;
  report["config"]["variant"] = opts.variant == Variant::GAMMA0 ? 0.0 : 0.5;
  report["config"]["alpha"] = opts.alpha;
  report["changepoints"] = result.changepoints;
  json detections = json::array();
  for (const Detection& det : result.detections) {
    detections.push_back(json{{"left", det.left},
                              {"right", det.right},
                              {"tau", det.tau},
                              {"lambda", det.lambda},
                              {"p_linf", det.p_linf},
                              {"p_l2", det.p_l2},
                              {"p_combined", det.p_combined},
                              {"located_by", det.linf_won ? "max-linf" : "max-l2"}});
  }
  report["detections"] = std::move(detections);
  std::cout << (pretty ? report.dump(2) : report.dump()) << "\n";

  std::cerr << "detected " << result.changepoints.size() << " changepoint(s)";
  if (!result.changepoints.empty()) {
    std::cerr << " at:";
    for (const Index cp : result.changepoints) std::cerr << ' ' << cp;
  }
  std::cerr << "\n";
  return 0;
}

std::vector<Method> parse_methods(const std::string& spec) {
  std::vector<Method> methods;
  if (spec == "all") {
    return {Method::SMAX0, Method::SSUM0, Method::SCMS0,
            Method::SMAX05, Method::SSUM05, Method::SCMS05};
  }
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto m = method_from_name(token);
    if (!m) throw InputError("unknown method: " + token);
    methods.push_back(*m);
  }
  if (methods.empty()) throw InputError("no methods given");
  return methods;
}

int run_simulate(const std::string& scenario_name_str, Index n, Index p, int reps,
                 std::vector<double> deltas, std::vector<Index> sparsities,
                 std::vector<double> tau_fracs, const std::string& methods_str, double alpha,
                 std::uint64_t seed, std::string kind, const std::string& out_path,
                 int threads, ScanConfig cfg, const FvOptions& fv_opts) {
  const auto scenario = scenario_from_name(scenario_name_str);
  if (!scenario) throw InputError("unknown scenario: " + scenario_name_str);
  if (reps < 1) throw InputError("reps must be at least 1");

  ScenarioSpec spec;
  spec.scenario = *scenario;
  spec.n = n;
  spec.p = p;
  spec.seed = seed;
  cfg.seed = seed;
  cfg.alpha = alpha;
  validate_config(cfg, n);

  const std::vector<Method> methods = parse_methods(methods_str);
  const FVTable fv = obtain_fv_table(fv_opts);

  if (kind == "auto") {
    const bool has_signal =
        !deltas.empty() && (deltas.size() > 1 || deltas.front() != 0.0);
    kind = has_signal ? "power" : "size";
  }
  if (deltas.empty()) deltas = {0.0};
  if (sparsities.empty()) sparsities = {p};
  if (tau_fracs.empty()) tau_fracs = {0.5};

  ExperimentReport report;
  if (kind == "size") {
    report = run_size_experiment(spec, methods, reps, alpha, cfg, fv, threads);
  } else if (kind == "power") {
    report = run_power_experiment(spec, deltas, sparsities, tau_fracs, methods, reps, alpha, cfg,
                                  fv, threads);
  } else if (kind == "accuracy") {
    report = run_accuracy_experiment(spec, deltas, sparsities, tau_fracs, methods, reps, cfg, fv,
                                     threads);
  } else {
    throw InputError("unknown experiment kind: " + kind);
  }

  if (out_path.empty()) {
    report.write_csv(std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot open file for writing: " + out_path);
    report.write_csv(out);
  }
  report.write_table(std::cerr);
  return 0;
}

int run_fv(const FvOptions& opts, const std::string& out_path) {
  const FVTable table = simulate_fv(opts.grid, opts.reps, opts.seed, opts.threads);
  if (!out_path.empty()) {
    save_fv_table(table, out_path);
  }
  std::cout << "grid " << table.grid << ", reps " << table.reps << ", seed " << table.seed
            << "\n";
  std::cout << "q90 " << table.quantile(0.90) << "\n";
  std::cout << "q95 " << table.quantile(0.95) << "\n";
  std::cout << "q99 " << table.quantile(0.99) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust adaptive changepoint tests for high-dimensional sequences"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // test
  auto* test_cmd = app.add_subcommand("test", "Test a CSV dataset for a mean change");
  std::string test_csv;
  bool test_header = false;
  std::string test_method = "scms";
  double test_gamma = 0.0;
  bool test_pretty = false;
  ScanConfig test_cfg;
  FvOptions test_fv;
  test_cmd->add_option("--csv", test_csv, "Input CSV, one observation per row")->required();
  test_cmd->add_flag("--header", test_header, "Skip a single header row");
  test_cmd->add_option("--method", test_method, "smax | ssum | scms | mean")
      ->check(CLI::IsMember({"smax", "ssum", "scms", "mean"}));
  test_cmd->add_option("--gamma", test_gamma, "CUSUM weight exponent: 0 or 0.5")
      ->check(CLI::IsMember({0.0, 0.5}));
  test_cmd->add_flag("--pretty", test_pretty, "Indent the JSON report");
  add_config_flags(test_cmd, test_cfg);
  add_fv_flags(test_cmd, test_fv);

  // segment
  auto* seg_cmd = app.add_subcommand("segment", "Recursive multiple-changepoint segmentation");
  std::string seg_csv;
  bool seg_header = false;
  bool seg_pretty = false;
  double seg_variant = 0.5;
  ScanConfig seg_cfg;
  SegmentOptions seg_opts;
  FvOptions seg_fv;
  seg_cmd->add_option("--csv", seg_csv, "Input CSV, one observation per row")->required();
  seg_cmd->add_flag("--header", seg_header, "Skip a single header row");
  seg_cmd->add_option("--variant", seg_variant, "Adaptive variant gamma: 0 or 0.5")
      ->check(CLI::IsMember({0.0, 0.5}));
  seg_cmd->add_option("--lambda-abs", seg_opts.lambda_abs,
                      "Absolute boundary parameter for long intervals")
      ->check(CLI::Range(1, 1000000));
  seg_cmd->add_option("--min-length", seg_opts.min_length, "Shortest testable interval")
      ->check(CLI::Range(8, 1000000));
  seg_cmd->add_flag("--pretty", seg_pretty, "Indent the JSON report");
  add_config_flags(seg_cmd, seg_cfg);
  add_fv_flags(seg_cmd, seg_fv);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Size/power/accuracy experiments");
  std::string sim_scenario = "I";
  Index sim_n = 200, sim_p = 100;
  int sim_reps = 500;
  std::vector<double> sim_deltas;
  std::vector<Index> sim_sparsities;
  std::vector<double> sim_tau_fracs;
  std::string sim_methods = "all";
  double sim_alpha = 0.05;
  std::uint64_t sim_seed = 1;
  std::string sim_kind = "auto";
  std::string sim_out;
  int sim_threads = 0;
  ScanConfig sim_cfg;
  FvOptions sim_fv;
  sim_cmd->add_option("--scenario", sim_scenario, "I | II | III (normal, t6, mixture)");
  sim_cmd->add_option("--n", sim_n, "Observations per replicate")->check(CLI::Range(4, 10000000));
  sim_cmd->add_option("--p", sim_p, "Dimension")->check(CLI::Range(1, 10000000));
  sim_cmd->add_option("--reps", sim_reps, "Monte Carlo replications")
      ->check(CLI::Range(1, 10000000));
  sim_cmd->add_option("--delta", sim_deltas, "Squared signal norms (comma separated)")
      ->delimiter(',');
  sim_cmd->add_option("--sparsity", sim_sparsities, "Changed-coordinate counts")->delimiter(',');
  sim_cmd->add_option("--tau-frac", sim_tau_fracs, "Changepoint locations as fractions of n")
      ->delimiter(',');
  sim_cmd->add_option("--methods", sim_methods,
                      "Comma list of smax0,ssum0,scms0,smax05,ssum05,scms05,mean or 'all'");
  sim_cmd->add_option("--alpha", sim_alpha, "Significance level");
  sim_cmd->add_option("--seed", sim_seed, "Master seed");
  sim_cmd->add_option("--kind", sim_kind, "size | power | accuracy | auto")
      ->check(CLI::IsMember({"size", "power", "accuracy", "auto"}));
  sim_cmd->add_option("--out", sim_out, "Write the CSV report here instead of stdout");
  sim_cmd->add_option("--threads", sim_threads, "Worker threads (0 = all cores)");
  sim_cmd->add_option("--boundary-frac", sim_cfg.boundary_fraction, "Boundary removal fraction");
  sim_cmd->add_option("--rho-trim", sim_cfg.trim_fraction, "Trimmed-segment fraction");
  sim_cmd->add_option("--tol", sim_cfg.hr_tolerance, "Fixed-point solver tolerance");
  add_fv_flags(sim_cmd, sim_fv);

  // fv
  auto* fv_cmd = app.add_subcommand("fv", "Build and inspect the F_V quantile table");
  FvOptions fv_opts;
  std::string fv_out;
  fv_cmd->add_option("--grid", fv_opts.grid, "Discretization size N_d")
      ->check(CLI::Range(2, 1000000));
  fv_cmd->add_option("--reps", fv_opts.reps, "Monte Carlo replications")
      ->check(CLI::Range(1000L, 100000000L));
  fv_cmd->add_option("--seed", fv_opts.seed, "Sampling seed");
  fv_cmd->add_option("--out", fv_out, "Cache file to write");
  fv_cmd->add_option("--threads", fv_opts.threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
    if (test_cmd->parsed()) {
      return run_test(test_csv, test_header, test_method, test_gamma, test_cfg, test_fv,
                      test_pretty);
    }
    if (seg_cmd->parsed()) {
      seg_opts.variant = seg_variant == 0.0 ? Variant::GAMMA0 : Variant::GAMMA05;
      seg_opts.alpha = seg_cfg.alpha;
      return run_segment(seg_csv, seg_header, seg_cfg, seg_opts, seg_fv, seg_pretty);
    }
    if (sim_cmd->parsed()) {
      sim_fv.threads = sim_threads;
      return run_simulate(sim_scenario, sim_n, sim_p, sim_reps, sim_deltas, sim_sparsities,
                          sim_tau_fracs, sim_methods, sim_alpha, sim_seed, sim_kind, sim_out,
                          sim_threads, sim_cfg, sim_fv);
    }
    if (fv_cmd->parsed()) {
      return run_fv(fv_opts, fv_out);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  } catch (const CalibrationError& e) {
    std::cerr << "signscan: calibration error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "signscan: input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "signscan: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

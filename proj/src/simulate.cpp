#include "signscan/simulate.hpp"

#include "signscan/parallel.hpp"
#include "signscan/rng.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>

namespace signscan {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::NORMAL: return "I";
    case Scenario::STUDENT_T6: return "II";
    case Scenario::MIXTURE: return "III";
  }
  return "?";
}

std::optional<Scenario> scenario_from_name(const std::string& name) {
  if (name == "I" || name == "1" || name == "normal") return Scenario::NORMAL;
  if (name == "II" || name == "2" || name == "t6") return Scenario::STUDENT_T6;
  if (name == "III" || name == "3" || name == "mixture") return Scenario::MIXTURE;
  return std::nullopt;
}

Vector signal_vector(const ScenarioSpec& spec) {
  const Index k = spec.k_sparsity == 0 ? spec.p : spec.k_sparsity;
  if (k < 1 || k > spec.p) throw InputError("sparsity must lie in [1, p]");
  Vector delta = Vector::Zero(spec.p);
  if (spec.delta > 0.0) {
    delta.head(k).setConstant(std::sqrt(spec.delta / static_cast<double>(k)));
  }
  return delta;
}

DataMatrix generate(const ScenarioSpec& spec) {
  if (spec.n < 4 || spec.p < 1) throw InputError("scenario needs n >= 4 and p >= 1");
  if (!(spec.rho > -1.0 && spec.rho < 1.0)) throw InputError("rho must lie in (-1, 1)");
  if (spec.delta < 0.0) throw InputError("delta must be nonnegative");
  if (spec.tau && (*spec.tau < 1 || *spec.tau > spec.n)) {
    throw InputError("tau must lie in [1, n]");
  }

  const Vector delta = signal_vector(spec);
  std::mt19937_64 rng(splitmix64(spec.seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double cross = std::sqrt(1.0 - spec.rho * spec.rho);
  const double t_scale = spec.t_scale_matches_sigma ? 1.0 : std::sqrt(2.0 / 3.0);

  Matrix x(spec.n, spec.p);
  Vector w(spec.p);
  for (Index i = 0; i < spec.n; ++i) {
    // AR(1) recursion gives exactly the (rho^{|j-l|}) marginal covariance.
    w[0] = normal(rng);
    for (Index j = 1; j < spec.p; ++j) w[j] = spec.rho * w[j - 1] + cross * normal(rng);

    switch (spec.scenario) {
      case Scenario::NORMAL:
        x.row(i) = w.transpose();
        break;
      case Scenario::STUDENT_T6: {
        // chi^2_6 as -2 log(u1 u2 u3); the scale 2/3 makes the covariance
        // (not the scale matrix) equal the target.
        const double u1 = 1.0 - uniform(rng);
        const double u2 = 1.0 - uniform(rng);
        const double u3 = 1.0 - uniform(rng);
        const double chi2 = -2.0 * std::log(u1 * u2 * u3);
        x.row(i) = (t_scale * std::sqrt(6.0 / chi2)) * w.transpose();
        break;
      }
      case Scenario::MIXTURE: {
        const double u = uniform(rng);
        x.row(i) = (u < 0.8 ? 1.0 : 3.0) * w.transpose();
        break;
      }
    }
    if (spec.tau && i + 1 > *spec.tau) x.row(i) += delta.transpose();
  }
  return DataMatrix::from_values(std::move(x));
}

namespace {

struct CellResult {
  std::vector<double> values;  // per-method aggregate
  std::vector<double> ses;
  int failures = 0;
};

// Runs `reps` replicates of one experiment cell and aggregates per method.
// `accuracy` switches the aggregate from rejection rate to mean scaled error.
CellResult run_cell(const ScenarioSpec& spec, const std::vector<Method>& methods, int reps,
                    double alpha, const ScanConfig& cfg, const FVTable& fv, bool accuracy,
                    int threads) {
  const std::size_t nm = methods.size();
  bool with_baseline = false;
  for (const Method m : methods) with_baseline |= (m == Method::MEAN_BASELINE);

  std::vector<std::vector<double>> per_rep(static_cast<std::size_t>(reps));
  std::vector<char> failed(static_cast<std::size_t>(reps), 0);

  ScanConfig run_cfg = cfg;
  run_cfg.alpha = alpha;
  parallel_for(reps, threads, [&](long r) {
    ScenarioSpec rep_spec = spec;
    rep_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
    try {
      const DataMatrix data = generate(rep_spec);
      const MethodSet set = evaluate_all(data, run_cfg, &fv, with_baseline);
      auto& slot = per_rep[static_cast<std::size_t>(r)];
      slot.resize(nm);
      for (std::size_t m = 0; m < nm; ++m) {
        const TestOutcome& out = set.by_method(methods[m]);
        if (accuracy) {
          const double tau_hat = static_cast<double>(out.k_argmax.value());
          const double tau_true = static_cast<double>(rep_spec.tau.value());
          slot[m] = std::abs(tau_hat - tau_true) / static_cast<double>(rep_spec.n);
        } else {
          slot[m] = out.p_value < alpha ? 1.0 : 0.0;
        }
      }
    } catch (const std::exception&) {
      failed[static_cast<std::size_t>(r)] = 1;
    }
  });

  CellResult cell;
  cell.values.assign(nm, 0.0);
  cell.ses.assign(nm, 0.0);
  int ok = 0;
  for (int r = 0; r < reps; ++r) {
    if (failed[static_cast<std::size_t>(r)]) {
      ++cell.failures;
      continue;
    }
    ++ok;
    for (std::size_t m = 0; m < nm; ++m) cell.values[m] += per_rep[static_cast<std::size_t>(r)][m];
  }
  if (ok > 0) {
    for (std::size_t m = 0; m < nm; ++m) cell.values[m] /= static_cast<double>(ok);
    if (accuracy) {
      // sample sd of the scaled errors / sqrt(reps)
      std::vector<double> ss(nm, 0.0);
      for (int r = 0; r < reps; ++r) {
        if (failed[static_cast<std::size_t>(r)]) continue;
        for (std::size_t m = 0; m < nm; ++m) {
          const double d = per_rep[static_cast<std::size_t>(r)][m] - cell.values[m];
          ss[m] += d * d;
        }
      }
      for (std::size_t m = 0; m < nm; ++m) {
        cell.ses[m] = ok > 1 ? std::sqrt(ss[m] / static_cast<double>(ok - 1) /
                                         static_cast<double>(ok))
                             : 0.0;
      }
    } else {
      for (std::size_t m = 0; m < nm; ++m) {
        cell.ses[m] = std::sqrt(cell.values[m] * (1.0 - cell.values[m]) / static_cast<double>(ok));
      }
    }
  }
  return cell;
}

ExperimentRow make_row(const std::string& kind, Method method, const ScenarioSpec& spec,
                       double delta, Index sparsity, double tau_frac, double value, double se,
                       int reps, int failures) {
  ExperimentRow row;
  row.kind = kind;
  row.method = method;
  row.scenario = spec.scenario;
  row.n = spec.n;
  row.p = spec.p;
  row.delta = delta;
  row.sparsity = sparsity;
  row.tau_frac = tau_frac;
  row.value = value;
  row.se = se;
  row.reps = reps;
  row.seed = spec.seed;
  row.failures = failures;
  return row;
}

}  // namespace

ExperimentReport run_size_experiment(const ScenarioSpec& spec, const std::vector<Method>& methods,
                                     int reps, double alpha, const ScanConfig& cfg,
                                     const FVTable& fv, int threads) {
  if (reps < 1) throw InputError("reps must be at least 1");
  ScenarioSpec null_spec = spec;
  null_spec.tau.reset();
  null_spec.delta = 0.0;
  const CellResult cell = run_cell(null_spec, methods, reps, alpha, cfg, fv, false, threads);
  ExperimentReport report;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    report.rows.push_back(make_row("size", methods[m], null_spec, 0.0, 0, 0.0, cell.values[m],
                                   cell.ses[m], reps, cell.failures));
  }
  return report;
}

ExperimentReport run_power_experiment(const ScenarioSpec& spec, const std::vector<double>& deltas,
                                      const std::vector<Index>& sparsities,
                                      const std::vector<double>& tau_fracs,
                                      const std::vector<Method>& methods, int reps, double alpha,
                                      const ScanConfig& cfg, const FVTable& fv, int threads) {
  if (reps < 1) throw InputError("reps must be at least 1");
  ExperimentReport report;
  std::uint64_t cell_index = 0;
  for (const double tau_frac : tau_fracs) {
    for (const Index sparsity : sparsities) {
      for (const double delta : deltas) {
        ScenarioSpec cell_spec = spec;
        cell_spec.delta = delta;
        cell_spec.k_sparsity = sparsity;
        cell_spec.tau = static_cast<Index>(std::lround(tau_frac * static_cast<double>(spec.n)));
        cell_spec.seed = derive_seed(spec.seed, 0xC0FFEE00ULL + cell_index++);
        if (delta == 0.0) cell_spec.tau.reset();
        const CellResult cell =
            run_cell(cell_spec, methods, reps, alpha, cfg, fv, false, threads);
        for (std::size_t m = 0; m < methods.size(); ++m) {
          report.rows.push_back(make_row("power", methods[m], cell_spec, delta, sparsity, tau_frac,
                                         cell.values[m], cell.ses[m], reps, cell.failures));
        }
      }
    }
  }
  return report;
}

ExperimentReport run_accuracy_experiment(const ScenarioSpec& spec,
                                         const std::vector<double>& deltas,
                                         const std::vector<Index>& sparsities,
                                         const std::vector<double>& tau_fracs,
                                         const std::vector<Method>& methods, int reps,
                                         const ScanConfig& cfg, const FVTable& fv, int threads) {
  if (reps < 1) throw InputError("reps must be at least 1");
  for (const Method m : methods) {
    if (m == Method::MEAN_BASELINE) {
      throw InputError("accuracy experiments cover the spatial methods only");
    }
  }
  ExperimentReport report;
  std::uint64_t cell_index = 0;
  for (const double tau_frac : tau_fracs) {
    for (const Index sparsity : sparsities) {
      for (const double delta : deltas) {
        if (!(delta > 0.0)) throw InputError("accuracy experiments need delta > 0");
        ScenarioSpec cell_spec = spec;
        cell_spec.delta = delta;
        cell_spec.k_sparsity = sparsity;
        cell_spec.tau = static_cast<Index>(std::lround(tau_frac * static_cast<double>(spec.n)));
        cell_spec.seed = derive_seed(spec.seed, 0xACC00000ULL + cell_index++);
        const CellResult cell =
            run_cell(cell_spec, methods, reps, cfg.alpha, cfg, fv, true, threads);
        for (std::size_t m = 0; m < methods.size(); ++m) {
          report.rows.push_back(make_row("accuracy", methods[m], cell_spec, delta, sparsity,
                                         tau_frac, cell.values[m], cell.ses[m], reps,
                                         cell.failures));
        }
      }
    }
  }
  return report;
}

void ExperimentReport::write_csv(std::ostream& os) const {
  os << "kind,method,scenario,n,p,delta,sparsity,tau_frac,rate,se,reps,seed,failures\n";
  char buf[64];
  for (const ExperimentRow& row : rows) {
    os << row.kind << ',' << method_name(row.method) << ',' << scenario_name(row.scenario) << ','
       << row.n << ',' << row.p << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", row.delta);
    os << buf << ',' << row.sparsity << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", row.tau_frac);
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", row.value);
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.10g", row.se);
    os << buf << ',' << row.reps << ',' << row.seed << ',' << row.failures << '\n';
  }
}

void ExperimentReport::write_table(std::ostream& os) const {
  if (rows.empty()) return;
  os << std::left << std::setw(10) << "kind" << std::setw(11) << "method" << std::setw(9)
     << "scenario" << std::right << std::setw(6) << "n" << std::setw(6) << "p" << std::setw(8)
     << "delta" << std::setw(6) << "k" << std::setw(8) << "tau/n" << std::setw(10) << "value"
     << std::setw(10) << "se" << std::setw(7) << "reps" << '\n';
  for (const ExperimentRow& row : rows) {
    os << std::left << std::setw(10) << row.kind << std::setw(11) << method_name(row.method)
       << std::setw(9) << scenario_name(row.scenario) << std::right << std::setw(6) << row.n
       << std::setw(6) << row.p << std::setw(8) << std::setprecision(3) << row.delta
       << std::setw(6) << row.sparsity << std::setw(8) << std::setprecision(3) << row.tau_frac
       << std::setw(10) << std::setprecision(4) << row.value << std::setw(10)
       << std::setprecision(3) << row.se << std::setw(7) << row.reps << '\n';
  }
}

}  // namespace signscan

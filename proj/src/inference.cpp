#include "signscan/inference.hpp"

#include "signscan/parallel.hpp"
#include "signscan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace signscan {

namespace {
constexpr double kLogPi = 1.1447298858494001741;
constexpr double kPFloor = 1e-300;
}  // namespace

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

double gumbel2_cdf(double x) { return std::exp(-2.0 * std::exp(-x)); }

double chi2_4_cdf(double x) {
  if (!(x > 0.0)) return 0.0;
  return 1.0 - std::exp(-0.5 * x) * (1.0 + 0.5 * x);
}

GumbelParams gumbel_params(double x) {
  const double lx = std::log(x);
  if (!(lx > 1.0)) {
    throw CalibrationError("extreme-value normalization undefined: argument " +
                           std::to_string(x) + " must exceed e");
  }
  GumbelParams out;
  out.argument = x;
  out.A = std::sqrt(2.0 * lx);
  out.D = 2.0 * lx + 0.5 * std::log(lx) - 0.5 * kLogPi;
  return out;
}

double boundary_h_n(Index n, Index lambda) {
  const double ratio = static_cast<double>(n) / static_cast<double>(lambda) - 1.0;
  const double hn = ratio * ratio;
  if (!(hn > 1.0)) {
    throw CalibrationError("boundary parameter too large: h_n = " + std::to_string(hn) +
                           " <= 1 (lambda/n >= 1/2)");
  }
  return hn;
}

double fisher_combine(double p1, double p2) {
  p1 = std::clamp(p1, kPFloor, 1.0);
  p2 = std::clamp(p2, kPFloor, 1.0);
  const double x = -2.0 * (std::log(p1) + std::log(p2));
  return std::exp(-0.5 * x) * (1.0 + 0.5 * x);
}

namespace detail {

void fv_path(std::mt19937_64& rng, int N_d, Vector& out) {
  out.resize(N_d);
  std::normal_distribution<double> normal(0.0, 1.0);
  double w = 0.0;       // Brownian motion at the transformed time
  double u_prev = 0.0;  // transformed time (t/(1-t))^2
  for (int i = 1; i < N_d; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(N_d);
    const double ratio = t / (1.0 - t);
    const double u = ratio * ratio;
    w += std::sqrt(u - u_prev) * normal(rng);
    u_prev = u;
    const double shrink = (1.0 - t) * (1.0 - t);
    out[i - 1] = shrink * w;
  }
  out[N_d - 1] = 0.0;  // V(1) is degenerate
}

}  // namespace detail

FVTable simulate_fv(int N_d, long B, std::uint64_t seed, int threads) {
  if (N_d < 2) throw InputError("F_V grid size must be at least 2");
  if (B < 1000) throw InputError("F_V replication count must be at least 1000");

  FVTable table;
  table.grid = N_d;
  table.reps = B;
  table.seed = seed;
  table.samples.resize(static_cast<std::size_t>(B));

  if (threads <= 0) threads = default_threads();
  const long chunks = std::min<long>(threads, B);
  parallel_for(chunks, static_cast<int>(chunks), [&](long c) {
    const long lo = B * c / chunks;
    const long hi = B * (c + 1) / chunks;
    Vector path;
    for (long b = lo; b < hi; ++b) {
      auto rng = make_engine(seed, static_cast<std::uint64_t>(b));
      detail::fv_path(rng, N_d, path);
      table.samples[static_cast<std::size_t>(b)] = path.maxCoeff();
    }
  });
  std::sort(table.samples.begin(), table.samples.end());
  return table;
}

double FVTable::ecdf(double x) const {
  const auto it = std::upper_bound(samples.begin(), samples.end(), x);
  return static_cast<double>(it - samples.begin()) / static_cast<double>(samples.size());
}

double FVTable::quantile(double q) const {
  q = std::clamp(q, 0.0, 1.0);
  const double h = q * static_cast<double>(samples.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= samples.size()) return samples.back();
  const double frac = h - static_cast<double>(lo);
  return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
}

namespace {
constexpr char kFvMagic[8] = {'S', 'S', 'F', 'V', 'T', 'B', '0', '1'};
}

void save_fv_table(const FVTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open file for writing: " + path);
  out.write(kFvMagic, sizeof(kFvMagic));
  const std::uint64_t grid = static_cast<std::uint64_t>(table.grid);
  const std::uint64_t reps = static_cast<std::uint64_t>(table.reps);
  out.write(reinterpret_cast<const char*>(&grid), sizeof(grid));
  out.write(reinterpret_cast<const char*>(&reps), sizeof(reps));
  out.write(reinterpret_cast<const char*>(&table.seed), sizeof(table.seed));
  out.write(reinterpret_cast<const char*>(table.samples.data()),
            static_cast<std::streamsize>(table.samples.size() * sizeof(double)));
  if (!out) throw InputError("write failed: " + path);
}

FVTable load_fv_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFvMagic, sizeof(magic)) != 0) {
    throw InputError(path + ": not an F_V table file");
  }
  std::uint64_t grid = 0, reps = 0, seed = 0;
  in.read(reinterpret_cast<char*>(&grid), sizeof(grid));
  in.read(reinterpret_cast<char*>(&reps), sizeof(reps));
  in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  if (!in || reps == 0) throw InputError(path + ": truncated F_V table header");
  FVTable table;
  table.grid = static_cast<int>(grid);
  table.reps = static_cast<long>(reps);
  table.seed = seed;
  table.samples.resize(reps);
  in.read(reinterpret_cast<char*>(table.samples.data()),
          static_cast<std::streamsize>(reps * sizeof(double)));
  if (!in) throw InputError(path + ": truncated F_V table payload");
  if (!std::is_sorted(table.samples.begin(), table.samples.end())) {
    throw InputError(path + ": F_V samples not sorted");
  }
  return table;
}

namespace {

double finite_sample_factor(Index n) { return 1.0 - 1.0 / std::sqrt(static_cast<double>(n)); }



TestOutcome linf_outcome(const RawScan& med, const NuisanceEstimates& nuis, double gamma,
                         const ScanConfig& cfg, Index n, Index p) {
  const CusumCurve curve = curve_from_scan(med, Family::MEDIAN, gamma);
  TestOutcome out;
  out.method = gamma == 0.0 ? Method::SMAX0 : Method::SMAX05;
  out.gamma = gamma;
  out.k_argmax = curve.argmax_linf();
  out.statistic = curve.linf_at(*out.k_argmax) * finite_sample_factor(n);
  out.converged = curve.all_converged && nuis.fit_front.converged && nuis.fit_back.converged;
  out.nuisances = nuis;
  const double pd = static_cast<double>(p);
  const double zeta = nuis.zeta1_hat;
  if (gamma == 0.0) {
    out.standardized = 2.0 * pd * zeta * zeta * out.statistic * out.statistic - std::log(2.0 * pd);
  } else {
    const Index lambda = boundary_lambda(cfg, n);
    const GumbelParams params = gumbel_params(pd * std::log(boundary_h_n(n, lambda)));
    out.standardized = std::sqrt(pd) * zeta * params.A * out.statistic - params.D;
  }
  out.p_value = 1.0 - gumbel_cdf(out.standardized);
  return out;
}

TestOutcome l2_outcome(const RawScan& sign, const NuisanceEstimates& nuis, bool full_fit_converged,
                       double gamma, const ScanConfig& cfg, Index n, Index p, const FVTable* fv) {
  const CusumCurve curve = curve_from_scan(sign, Family::SIGN, gamma);
  TestOutcome out;
  out.method = gamma == 0.0 ? Method::SSUM0 : Method::SSUM05;
  out.gamma = gamma;
  // The changepoint estimate is the peak of the squared-norm curve itself; the
  // statistic maximizes the centered sequence below.
  out.k_argmax = curve.argmax_sq_l2();
  out.converged = full_fit_converged && nuis.fit_front.converged && nuis.fit_back.converged;
  out.nuisances = nuis;

  const double nn = static_cast<double>(n);
  const double pd = static_cast<double>(p);
  double best = -std::numeric_limits<double>::infinity();
  for (Index k = curve.k_min; k <= curve.k_max; ++k) {
    const double center =
        gamma == 0.0 ? static_cast<double>(k) * (nn - static_cast<double>(k)) * pd / (nn * nn) : pd;
    best = std::max(best, curve.sq_l2_at(k) - center);
  }
  out.statistic = best * finite_sample_factor(n);

  if (!(nuis.trR2_hat > 0.0)) {
    throw CalibrationError("tr(R^2) estimate is nonpositive; max-L2 calibration unavailable");
  }
  const double denom = std::sqrt(2.0 * nuis.trR2_hat);
  if (gamma == 0.0) {
    if (fv == nullptr) throw InputError("max-L2 test with gamma=0 requires an F_V table");
    out.standardized = out.statistic / denom;
    out.p_value = 1.0 - fv->ecdf(out.standardized);
  } else {
    const Index lambda = boundary_lambda(cfg, n);
    const double ratio = nn / static_cast<double>(lambda);
    const GumbelParams params = gumbel_params(std::log(ratio * ratio));
    out.standardized = params.A * std::abs(out.statistic) / denom - params.D;
    out.p_value = 1.0 - gumbel2_cdf(out.standardized);
  }
  return out;
}

TestOutcome mean_outcome(const RawScan& mean_scan, double gamma, const ScanConfig& cfg, Index n,
                         Index p) {
  const CusumCurve curve = curve_from_scan(mean_scan, Family::MEAN, gamma);
  TestOutcome out;
  out.method = Method::MEAN_BASELINE;
  out.gamma = gamma;
  out.k_argmax = curve.argmax_linf();
  out.statistic = curve.linf_at(*out.k_argmax) * finite_sample_factor(n);
  const double pd = static_cast<double>(p);
  if (gamma == 0.0) {
    out.standardized = 2.0 * out.statistic * out.statistic - std::log(2.0 * pd);
  } else {
    const Index lambda = boundary_lambda(cfg, n);
    const GumbelParams params = gumbel_params(pd * std::log(boundary_h_n(n, lambda)));
    out.standardized = params.A * out.statistic - params.D;
  }
  out.p_value = 1.0 - gumbel_cdf(out.standardized);
  return out;
}

TestOutcome combine_pair(const TestOutcome& linf, const TestOutcome& l2, Variant variant) {
  TestOutcome out;
  out.method = variant == Variant::GAMMA0 ? Method::SCMS0 : Method::SCMS05;
  out.gamma = variant == Variant::GAMMA0 ? 0.0 : 0.5;
  const double p1 = std::clamp(linf.p_value, kPFloor, 1.0);
  const double p2 = std::clamp(l2.p_value, kPFloor, 1.0);
  out.statistic = -2.0 * (std::log(p1) + std::log(p2));
  out.standardized = out.statistic;
  out.p_value = std::exp(-0.5 * out.statistic) * (1.0 + 0.5 * out.statistic);
  // Adaptive localization: follow whichever component carries more evidence.
  out.k_argmax = linf.p_value < l2.p_value ? linf.k_argmax : l2.k_argmax;
  out.converged = linf.converged && l2.converged;
  out.nuisances = linf.nuisances;
  return out;
}

void check_gamma(double gamma) {
  if (gamma != 0.0 && gamma != 0.5) throw InputError("gamma must be 0 or 0.5");
}

}  // namespace

TestOutcome max_linf_test(const DataMatrix& data, const NuisanceEstimates& nuis, double gamma,
                          const ScanConfig& cfg) {
  check_gamma(gamma);
  const RawScan med = scan_median(data, nuis, cfg);
  return linf_outcome(med, nuis, gamma, cfg, data.n(), data.p());
}

TestOutcome max_l2_test(const DataMatrix& data, const NuisanceEstimates& nuis, double gamma,
                        const ScanConfig& cfg, const FVTable* fv) {
  check_gamma(gamma);
  const LocationFit full = fit_location(data, 0, data.n(), nuis.D_hat, cfg);
  const RawScan sign = scan_sign(data, nuis, full.theta, cfg);
  return l2_outcome(sign, nuis, full.converged, gamma, cfg, data.n(), data.p(), fv);
}

TestOutcome mean_baseline_test(const DataMatrix& data, double gamma, const ScanConfig& cfg) {
  check_gamma(gamma);
  const RawScan scan = scan_mean(data, cfg);
  return mean_outcome(scan, gamma, cfg, data.n(), data.p());
}

ScanBundle compute_scans(const DataMatrix& data, const ScanConfig& cfg, bool with_mean) {
  validate_config(cfg, data.n());
  ScanBundle bundle;
  bundle.nuis = nuisance_estimates(data, cfg);
  bundle.full_fit = fit_location(data, 0, data.n(), bundle.nuis.D_hat, cfg);
  bundle.median = scan_median(data, bundle.nuis, cfg);
  bundle.sign = scan_sign(data, bundle.nuis, bundle.full_fit.theta, cfg);
  if (with_mean) bundle.mean = scan_mean(data, cfg);
  return bundle;
}

AdaptiveOutcome adaptive_test(const DataMatrix& data, const ScanConfig& cfg, Variant variant,
                              const FVTable* fv) {
  const ScanBundle bundle = compute_scans(data, cfg, false);
  const double gamma = variant == Variant::GAMMA0 ? 0.0 : 0.5;
  AdaptiveOutcome out;
  out.linf = linf_outcome(bundle.median, bundle.nuis, gamma, cfg, data.n(), data.p());
  out.l2 = l2_outcome(bundle.sign, bundle.nuis, bundle.full_fit.converged, gamma, cfg, data.n(),
                      data.p(), fv);
  out.combined = combine_pair(out.linf, out.l2, variant);
  return out;
}

MethodSet evaluate_from_scans(const ScanBundle& bundle, Index n, Index p, const ScanConfig& cfg,
                              const FVTable* fv) {
  MethodSet set;
  set.g0.linf = linf_outcome(bundle.median, bundle.nuis, 0.0, cfg, n, p);
  set.g0.l2 = l2_outcome(bundle.sign, bundle.nuis, bundle.full_fit.converged, 0.0, cfg, n, p, fv);
  set.g0.combined = combine_pair(set.g0.linf, set.g0.l2, Variant::GAMMA0);
  set.g05.linf = linf_outcome(bundle.median, bundle.nuis, 0.5, cfg, n, p);
  set.g05.l2 = l2_outcome(bundle.sign, bundle.nuis, bundle.full_fit.converged, 0.5, cfg, n, p, fv);
  set.g05.combined = combine_pair(set.g05.linf, set.g05.l2, Variant::GAMMA05);
  if (bundle.mean) {
    set.mean0 = mean_outcome(*bundle.mean, 0.0, cfg, n, p);
    set.mean05 = mean_outcome(*bundle.mean, 0.5, cfg, n, p);
  }
  return set;
}

MethodSet evaluate_all(const DataMatrix& data, const ScanConfig& cfg, const FVTable* fv,
                       bool with_baseline) {
  const ScanBundle bundle = compute_scans(data, cfg, with_baseline);
  return evaluate_from_scans(bundle, data.n(), data.p(), cfg, fv);
}

const TestOutcome& MethodSet::by_method(Method m) const {
  switch (m) {
    case Method::SMAX0: return g0.linf;
    case Method::SSUM0: return g0.l2;
    case Method::SCMS0: return g0.combined;
    case Method::SMAX05: return g05.linf;
    case Method::SSUM05: return g05.l2;
    case Method::SCMS05: return g05.combined;
    case Method::MEAN_BASELINE:
      if (!mean0) throw Error("baseline outcome was not computed");
      return *mean0;
  }
  throw Error("unknown method");
}

}  // namespace signscan

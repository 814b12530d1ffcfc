#pragma once

#include "signscan/cusum.hpp"
#include "signscan/robust.hpp"
#include "signscan/types.hpp"

#include <random>
#include <vector>

namespace signscan {

/// Standard Gumbel CDF G(x) = exp(-exp(-x)).
double gumbel_cdf(double x);
/// Two-sided variant exp(-2 exp(-x)).
double gumbel2_cdf(double x);
/// Chi-squared CDF with 4 degrees of freedom, 1 - e^{-x/2}(1 + x/2); 0 for x <= 0.
double chi2_4_cdf(double x);

/// Normalizing constants A(x) = sqrt(2 log x) and
/// D(x) = 2 log x + log(log x)/2 - log(pi)/2 for the extreme-value calibrations.
/// Defined only for log x > 1; smaller arguments throw CalibrationError.
struct GumbelParams {
  double A = 0.0;
  double D = 0.0;
  double argument = 0.0;
};
GumbelParams gumbel_params(double x);

/// h_n = (n/lambda - 1)^2, the effective window-count entering the gamma=0.5
/// max-L_inf calibration. Throws CalibrationError when lambda/n >= 1/2.
double boundary_h_n(Index n, Index lambda);

/// Fisher combination of two p-values: the chi-squared(4) survival of
/// -2(log p1 + log p2), in closed form. Inputs are clamped to [1e-300, 1].
double fisher_combine(double p1, double p2);

/// Sorted Monte-Carlo draws of max_t V(t), where V is the zero-mean Gaussian
/// process with Cov(V(t), V(s)) = (1-t)^2 s^2 for s <= t, evaluated on the
/// uniform grid {i/N_d}. Sampling uses the exact time change
/// V(t) = (1-t)^2 W((t/(1-t))^2) with W standard Brownian motion, so each draw
/// costs O(N_d); draw b uses an RNG stream derived from (seed, b), making the
/// table independent of thread scheduling.
struct FVTable {
  int grid = 0;            // N_d
  long reps = 0;           // B
  std::uint64_t seed = 0;
  std::vector<double> samples;  // ascending

  double ecdf(double x) const;
  double quantile(double q) const;  // linear interpolation between order statistics
};

FVTable simulate_fv(int N_d, long B, std::uint64_t seed, int threads = 0);
void save_fv_table(const FVTable& table, const std::string& path);
FVTable load_fv_table(const std::string& path);

namespace detail {
/// One path (V(t_1), ..., V(t_{N_d})) on the uniform grid; the last entry is
/// exactly 0. Exposed for the covariance checks in tests.
void fv_path(std::mt19937_64& rng, int N_d, Vector& out);
}  // namespace detail

struct TestOutcome {
  Method method = Method::SMAX0;
  double gamma = 0.0;
  double statistic = 0.0;
  double standardized = 0.0;  // the argument fed to the limiting CDF
  double p_value = 1.0;
  std::optional<Index> k_argmax;
  bool converged = true;  // every location/scatter fit involved converged
  std::optional<NuisanceEstimates> nuisances;
};

/// Max-L_inf test on the spatial-median CUSUM curve.
TestOutcome max_linf_test(const DataMatrix& data, const NuisanceEstimates& nuis, double gamma,
                          const ScanConfig& cfg);

/// Max-L_2 test on the spatial-sign CUSUM curve. The F_V table is required for
/// gamma = 0 and unused otherwise.
TestOutcome max_l2_test(const DataMatrix& data, const NuisanceEstimates& nuis, double gamma,
                        const ScanConfig& cfg, const FVTable* fv);

/// Mean/variance-standardized CUSUM baseline with the analogous max-L_inf
/// extreme-value calibration.
TestOutcome mean_baseline_test(const DataMatrix& data, double gamma, const ScanConfig& cfg);

enum class Variant { GAMMA0, GAMMA05 };

struct AdaptiveOutcome {
  TestOutcome combined;  // Fisher combination; k_argmax follows the winning curve
  TestOutcome linf;
  TestOutcome l2;
};

/// Runs the matching (max-L_inf, max-L_2) pair on one shared set of nuisance
/// estimates and Fisher-combines the p-values.
AdaptiveOutcome adaptive_test(const DataMatrix& data, const ScanConfig& cfg, Variant variant,
                              const FVTable* fv);

/// Shared per-dataset computations: one nuisance estimation, one full-sample
/// location fit, one median scan, one sign scan (and optionally the mean scan).
/// Both gamma variants of every statistic derive from these.
struct ScanBundle {
  NuisanceEstimates nuis;
  LocationFit full_fit;
  RawScan median;
  RawScan sign;
  std::optional<RawScan> mean;
};
ScanBundle compute_scans(const DataMatrix& data, const ScanConfig& cfg, bool with_mean = false);

struct MethodSet {
  AdaptiveOutcome g0;
  AdaptiveOutcome g05;
  std::optional<TestOutcome> mean0;
  std::optional<TestOutcome> mean05;

  const TestOutcome& by_method(Method m) const;
};

/// All six tests (plus the baseline when requested) from one ScanBundle.
MethodSet evaluate_all(const DataMatrix& data, const ScanConfig& cfg, const FVTable* fv,
                       bool with_baseline = false);
MethodSet evaluate_from_scans(const ScanBundle& bundle, Index n, Index p, const ScanConfig& cfg,
                              const FVTable* fv);

}  // namespace signscan

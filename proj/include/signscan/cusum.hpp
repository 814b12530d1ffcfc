#pragma once

#include "signscan/robust.hpp"
#include "signscan/types.hpp"

namespace signscan {

enum class Family { MEDIAN, SIGN, MEAN };

/// Per-k aggregates of a CUSUM vector over the scan window k in [k_min, k_max]
/// (inclusive). Only the linf norm and squared l2 norm are kept, which is all
/// the test statistics and argmax rules need.
struct CusumCurve {
  Family family = Family::MEDIAN;
  double gamma = 0.0;  // 0 or 0.5
  Index k_min = 0;
  Index k_max = 0;
  Vector linf;
  Vector sq_l2;
  bool all_converged = true;  // per-segment fits (MEDIAN family only)

  Index size() const { return k_max - k_min + 1; }
  double linf_at(Index k) const { return linf[k - k_min]; }
  double sq_l2_at(Index k) const { return sq_l2[k - k_min]; }

  /// Smallest k maximizing linf (resp. sq_l2).
  Index argmax_linf() const;
  Index argmax_sq_l2() const;
};

/// gamma-free per-k aggregates shared by the gamma=0 and gamma=0.5 curves of a
/// family; the gamma weight is a scalar per k, so norms rescale exactly.
struct RawScan {
  Index n = 0;
  Index k_min = 0;
  Index k_max = 0;
  Vector linf;    // aggregates of the unweighted CUSUM vector
  Vector sq_l2;
  bool all_converged = true;
};

/// Warm-started prefix/suffix location fits with the combined D_hat held
/// fixed; the per-k vector is sqrt(n) * D_hat^{-1/2} (theta_{1:k} - theta_{k+1:n}).
RawScan scan_median(const DataMatrix& data, const NuisanceEstimates& nuis, const ScanConfig& cfg);

/// Spatial signs of the full-sample standardized residuals, prefix-summed; the
/// per-k vector is sqrt(p/n) * (S_k - (k/n) S_n).
RawScan scan_sign(const DataMatrix& data, const NuisanceEstimates& nuis, const Vector& theta_full,
                  const ScanConfig& cfg);

/// Segment means standardized by full-sample per-coordinate variances
/// (divisor n-1); the per-k vector is sqrt(n) * Dvar^{-1/2} (mean_{1:k} - mean_{k+1:n}).
/// Throws InputError naming any zero-variance coordinate.
RawScan scan_mean(const DataMatrix& data, const ScanConfig& cfg);

/// Weight {k/n (1-k/n)}^e applied per k: e = 1-gamma for MEDIAN/MEAN families,
/// e = -gamma for the SIGN family.
CusumCurve curve_from_scan(const RawScan& scan, Family family, double gamma);

CusumCurve median_cusum(const DataMatrix& data, const NuisanceEstimates& nuis, double gamma,
                        const ScanConfig& cfg);
CusumCurve sign_cusum(const DataMatrix& data, const NuisanceEstimates& nuis,
                      const Vector& theta_full, double gamma, const ScanConfig& cfg);
CusumCurve mean_cusum(const DataMatrix& data, double gamma, const ScanConfig& cfg);

}  // namespace signscan

#pragma once

#include "signscan/types.hpp"

namespace signscan {

/// U(x) = x / ||x|| for x != 0, the zero vector otherwise.
Vector spatial_sign(const Vector& x);

/// Joint location/diagonal-scatter fixed point:
///   mean_i U(eps_i) = 0   and   p * mean_i U(eps_i) U(eps_i)^T has unit diagonal,
/// with eps_i = D^{-1/2}(x_i - theta). Solved by alternating a Weiszfeld-type
/// location step with a diagonal rescaling step, started from the sample mean
/// and per-coordinate sample variances unless a warm start is supplied.
struct HRFit {
  Vector theta;
  Vector d2;             // diagonal of the scatter, strictly positive
  int iterations = 0;
  double residual_sign = 0.0;  // linf norm of the mean spatial sign at (theta, d2)
  double residual_diag = 0.0;  // linf deviation of p * diag-average from 1
  bool converged = false;      // both residuals <= cfg.hr_tolerance
};

/// Fit on observations [first, first+len) of data. len >= 2 required. Exact
/// zero-residual observations are skipped in the location-step denominator (a
/// measure-zero event for continuous data); non-convergence after
/// cfg.hr_max_iter is reported via converged=false, never thrown.
HRFit hr_estimate(const DataMatrix& data, Index first, Index len, const ScanConfig& cfg,
                  const HRFit* warm_start = nullptr);

/// Location-only fit with the diagonal scatter held fixed (the per-segment
/// re-fit used by the prefix/suffix CUSUM scans).
struct LocationFit {
  Vector theta;
  int iterations = 0;
  double residual_sign = 0.0;
  bool converged = false;
};

LocationFit fit_location(const DataMatrix& data, Index first, Index len, const Vector& d2,
                         const ScanConfig& cfg, const Vector* warm_theta = nullptr);

/// Everything the test statistics standardize by, estimated from the first and
/// last floor(rho*n) observations so a mid-sample change cannot contaminate it:
///  - D_hat: entrywise average of the two segment diagonals, each normalized by
///    its own first entry (estimates D / d_1^2),
///  - zeta1_hat: average inverse radius ||D_hat^{-1/2}(x_i - theta_segment)||^{-1}
///    over both segments (estimates zeta_1 / d_1),
///  - trR2_hat: two-segment average of the pairwise U-statistic
///    p^2/(2m(m-1)) * sum_{i != j} (U_i^T U_j)^2 (estimates tr(R^2)).
struct NuisanceEstimates {
  Vector D_hat;
  double zeta1_hat = 0.0;
  double trR2_hat = 0.0;
  HRFit fit_front;
  HRFit fit_back;
};

NuisanceEstimates nuisance_estimates(const DataMatrix& data, const ScanConfig& cfg);

}  // namespace signscan

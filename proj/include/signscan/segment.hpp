#pragma once

#include "signscan/inference.hpp"

#include <vector>

namespace signscan {

/// Adaptive changepoint location on one sequence: the argmax of the median
/// curve's linf norm when the max-L_inf p-value is the smaller one, otherwise
/// the argmax of the sign curve's squared norm. Ties break to the smallest k.
Index locate_changepoint(const DataMatrix& data, const NuisanceEstimates& nuis,
                         const ScanConfig& cfg, Variant variant, const FVTable* fv);

struct Detection {
  Index left = 0;   // tested interval [left, right], 1-based inclusive
  Index right = 0;
  Index tau = 0;    // last pre-change row (global index)
  Index lambda = 0; // boundary parameter used on this interval
  double p_linf = 1.0;
  double p_l2 = 1.0;
  double p_combined = 1.0;
  bool linf_won = false;  // which curve located tau
};

struct SegmentationResult {
  std::vector<Index> changepoints;  // sorted ascending
  std::vector<Detection> detections;
};

struct SegmentOptions {
  Variant variant = Variant::GAMMA05;
  double alpha = 0.05;
  Index lambda_abs = 40;  // cap: lambda = min(lambda_abs, floor(boundary_fraction * len))
  Index min_length = 20;  // intervals shorter than max(2*lambda+2, min_length) are leaves
};

/// Recursive test-then-split. Each interval is tested at level alpha with its
/// own nuisance estimates; on rejection the located point t splits [l, r] into
/// [l, t] and [t+1, r]. Depth-first, left child first.
SegmentationResult binary_segment(const DataMatrix& data, const ScanConfig& cfg,
                                  const SegmentOptions& opts, const FVTable* fv);

}  // namespace signscan

#include "signscan/segment.hpp"

#include <algorithm>

namespace signscan {

Index locate_changepoint(const DataMatrix& data, const NuisanceEstimates& nuis,
                         const ScanConfig& cfg, Variant variant, const FVTable* fv) {
  validate_window(cfg, data.n());
  const double gamma = variant == Variant::GAMMA0 ? 0.0 : 0.5;
  const TestOutcome linf = max_linf_test(data, nuis, gamma, cfg);
  const TestOutcome l2 = max_l2_test(data, nuis, gamma, cfg, fv);
  return linf.p_value < l2.p_value ? *linf.k_argmax : *l2.k_argmax;
}

SegmentationResult binary_segment(const DataMatrix& data, const ScanConfig& cfg,
                                  const SegmentOptions& opts, const FVTable* fv) {
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (opts.lambda_abs < 1) throw InputError("lambda_abs must be at least 1");

  ScanConfig interval_cfg = cfg;
  interval_cfg.lambda_cap = opts.lambda_abs;

  SegmentationResult result;
  std::vector<std::pair<Index, Index>> work;  // [l, r], 1-based inclusive
  work.emplace_back(1, data.n());

  while (!work.empty()) {
    const auto [l, r] = work.back();
    work.pop_back();
    const Index len = r - l + 1;
    const Index lambda = boundary_lambda(interval_cfg, len);
    if (lambda < 1 || len < std::max<Index>(2 * lambda + 2, opts.min_length)) continue;
    if (trim_length(interval_cfg, len) < 2) continue;

    const DataMatrix slice = data.rows(l - 1, len);
    const AdaptiveOutcome outcome = adaptive_test(slice, interval_cfg, opts.variant, fv);
    if (!(outcome.combined.p_value < opts.alpha)) continue;

    const Index tau = (l - 1) + *outcome.combined.k_argmax;
    Detection det;
    det.left = l;
    det.right = r;
    det.tau = tau;
    det.lambda = lambda;
    det.p_linf = outcome.linf.p_value;
    det.p_l2 = outcome.l2.p_value;
    det.p_combined = outcome.combined.p_value;
    det.linf_won = outcome.linf.p_value < outcome.l2.p_value;
    result.detections.push_back(det);
    result.changepoints.push_back(tau);

    // Children are strictly shorter than the parent because tau is interior to
    // the scan window; process the left child first.
    work.emplace_back(tau + 1, r);
    work.emplace_back(l, tau);
  }

  std::sort(result.changepoints.begin(), result.changepoints.end());
  std::sort(result.detections.begin(), result.detections.end(),
            [](const Detection& a, const Detection& b) { return a.tau < b.tau; });
  return result;
}

}  // namespace signscan

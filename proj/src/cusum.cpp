#include "signscan/cusum.hpp"

#include <cmath>
#include <sstream>

namespace signscan {

namespace {

// Smallest index of the maximum (deterministic tie-break).
Index first_argmax(const Vector& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

Index CusumCurve::argmax_linf() const { return k_min + first_argmax(linf); }

Index CusumCurve::argmax_sq_l2() const { return k_min + first_argmax(sq_l2); }

RawScan scan_median(const DataMatrix& data, const NuisanceEstimates& nuis, const ScanConfig& cfg) {
  const Index n = data.n();
  const Index p = data.p();
  const Index lambda = boundary_lambda(cfg, n);
  validate_window(cfg, n);

  RawScan scan;
  scan.n = n;
  scan.k_min = lambda;
  scan.k_max = n - lambda;
  const Index count = scan.k_max - scan.k_min + 1;
  scan.linf.resize(count);
  scan.sq_l2.resize(count);

  const Vector dinv = nuis.D_hat.cwiseSqrt().cwiseInverse();
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  // Suffix sweep first (k = k_max down to k_min, segment (k+1):n growing by one
  // row per step), storing each suffix location; then the prefix sweep streams
  // against the stored suffixes. Warm starts make each re-fit a couple of
  // iterations.
  Matrix suffix_theta(count, p);
  {
    Vector warm;
    const Vector* warm_ptr = nullptr;
    for (Index k = scan.k_max; k >= scan.k_min; --k) {
      const LocationFit fit = fit_location(data, k, n - k, nuis.D_hat, cfg, warm_ptr);
      suffix_theta.row(k - scan.k_min) = fit.theta.transpose();
      scan.all_converged = scan.all_converged && fit.converged;
      warm = fit.theta;
      warm_ptr = &warm;
    }
  }
  {
    Vector warm;
    const Vector* warm_ptr = nullptr;
    Vector diff(p);
    for (Index k = scan.k_min; k <= scan.k_max; ++k) {
      const LocationFit fit = fit_location(data, 0, k, nuis.D_hat, cfg, warm_ptr);
      scan.all_converged = scan.all_converged && fit.converged;
      diff = sqrt_n * (fit.theta - suffix_theta.row(k - scan.k_min).transpose()).cwiseProduct(dinv);
      scan.linf[k - scan.k_min] = diff.lpNorm<Eigen::Infinity>();
      scan.sq_l2[k - scan.k_min] = diff.squaredNorm();
      warm = fit.theta;
      warm_ptr = &warm;
    }
  }
  return scan;
}

RawScan scan_sign(const DataMatrix& data, const NuisanceEstimates& nuis, const Vector& theta_full,
                  const ScanConfig& cfg) {
  const Index n = data.n();
  const Index p = data.p();
  const Index lambda = boundary_lambda(cfg, n);
  validate_window(cfg, n);

  RawScan scan;
  scan.n = n;
  scan.k_min = lambda;
  scan.k_max = n - lambda;
  const Index count = scan.k_max - scan.k_min + 1;
  scan.linf.resize(count);
  scan.sq_l2.resize(count);

  const Vector dinv = nuis.D_hat.cwiseSqrt().cwiseInverse();
  const double scale = std::sqrt(static_cast<double>(p) / static_cast<double>(n));

  // All n signs in one pass, then a running prefix sum.
  Matrix signs(n, p);
  Vector r(p);
  for (Index i = 0; i < n; ++i) {
    r = (data.values.row(i).transpose() - theta_full).cwiseProduct(dinv);
    const double nrm = r.norm();
    if (nrm == 0.0) {
      signs.row(i).setZero();
    } else {
      signs.row(i) = (r / nrm).transpose();
    }
  }
  const Vector total = signs.colwise().sum().transpose();  // S_n

  Vector prefix = Vector::Zero(p);
  Vector v(p);
  for (Index i = 0; i < n; ++i) {
    prefix += signs.row(i).transpose();
    const Index k = i + 1;
    if (k < scan.k_min || k > scan.k_max) continue;
    v = scale * (prefix - (static_cast<double>(k) / static_cast<double>(n)) * total);
    scan.linf[k - scan.k_min] = v.lpNorm<Eigen::Infinity>();
    scan.sq_l2[k - scan.k_min] = v.squaredNorm();
  }
  return scan;
}

RawScan scan_mean(const DataMatrix& data, const ScanConfig& cfg) {
  const Index n = data.n();
  const Index p = data.p();
  const Index lambda = boundary_lambda(cfg, n);
  validate_window(cfg, n);

  const Vector mean = data.values.colwise().mean().transpose();
  Vector var =
      (data.values.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() /
      static_cast<double>(n - 1);
  for (Index j = 0; j < p; ++j) {
    if (!(var[j] > 0.0)) {
      std::ostringstream os;
      os << "coordinate " << (j + 1) << " has zero sample variance";
      throw InputError(os.str());
    }
  }
  const Vector dinv = var.cwiseSqrt().cwiseInverse();
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  RawScan scan;
  scan.n = n;
  scan.k_min = lambda;
  scan.k_max = n - lambda;
  const Index count = scan.k_max - scan.k_min + 1;
  scan.linf.resize(count);
  scan.sq_l2.resize(count);

  const Vector total = data.values.colwise().sum().transpose();
  Vector prefix = Vector::Zero(p);
  for (Index i = 0; i < scan.k_min - 1; ++i) prefix += data.values.row(i).transpose();
  Vector v(p);
  for (Index k = scan.k_min; k <= scan.k_max; ++k) {
    prefix += data.values.row(k - 1).transpose();
    const double kk = static_cast<double>(k);
    const double nn = static_cast<double>(n);
    v = sqrt_n * (prefix / kk - (total - prefix) / (nn - kk)).cwiseProduct(dinv);
    scan.linf[k - scan.k_min] = v.lpNorm<Eigen::Infinity>();
    scan.sq_l2[k - scan.k_min] = v.squaredNorm();
  }
  return scan;
}

CusumCurve curve_from_scan(const RawScan& scan, Family family, double gamma) {
  if (gamma != 0.0 && gamma != 0.5) throw InputError("gamma must be 0 or 0.5");
  CusumCurve curve;
  curve.family = family;
  curve.gamma = gamma;
  curve.k_min = scan.k_min;
  curve.k_max = scan.k_max;
  curve.all_converged = scan.all_converged;
  const Index count = scan.k_max - scan.k_min + 1;
  curve.linf.resize(count);
  curve.sq_l2.resize(count);
  const double expo = (family == Family::SIGN) ? -gamma : (1.0 - gamma);
  const double nn = static_cast<double>(scan.n);
  for (Index k = scan.k_min; k <= scan.k_max; ++k) {
    const double frac = static_cast<double>(k) / nn;
    const double w = std::pow(frac * (1.0 - frac), expo);
    curve.linf[k - scan.k_min] = w * scan.linf[k - scan.k_min];
    curve.sq_l2[k - scan.k_min] = w * w * scan.sq_l2[k - scan.k_min];
  }
  return curve;
}

CusumCurve median_cusum(const DataMatrix& data, const NuisanceEstimates& nuis, double gamma,
                        const ScanConfig& cfg) {
  return curve_from_scan(scan_median(data, nuis, cfg), Family::MEDIAN, gamma);
}

CusumCurve sign_cusum(const DataMatrix& data, const NuisanceEstimates& nuis,
                      const Vector& theta_full, double gamma, const ScanConfig& cfg) {
  return curve_from_scan(scan_sign(data, nuis, theta_full, cfg), Family::SIGN, gamma);
}

CusumCurve mean_cusum(const DataMatrix& data, double gamma, const ScanConfig& cfg) {
  return curve_from_scan(scan_mean(data, cfg), Family::MEAN, gamma);
}

}  // namespace signscan

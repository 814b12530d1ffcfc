#include "signscan/robust.hpp"

#include <cmath>
#include <iostream>

namespace signscan {

namespace {

// Residual norms below this are treated as an exact hit of the location.
constexpr double kZeroResidual = 1e-290;
// Floor for diagonal entries so a degenerate rescaling step cannot zero them.
constexpr double kMinDiag = 1e-100;

struct StepSums {
  Vector sum_sign;      // sum of spatial signs of the standardized residuals
  Vector sum_usq;       // coordinatewise sum of squared signs
  double sum_invnorm = 0.0;
  Index n_zero = 0;
};

// One pass over the segment at the current iterate. dinv = d2^{-1/2}.
void accumulate(const Eigen::Ref<const Matrix>& block, const Vector& theta, const Vector& dinv,
                bool want_usq, Vector& scratch, StepSums& s) {
  const Index m = block.rows();
  const Index p = block.cols();
  s.sum_sign.setZero(p);
  if (want_usq) s.sum_usq.setZero(p);
  s.sum_invnorm = 0.0;
  s.n_zero = 0;
  for (Index i = 0; i < m; ++i) {
    scratch = (block.row(i).transpose() - theta).cwiseProduct(dinv);
    const double nrm = scratch.norm();
    if (nrm <= kZeroResidual) {
      ++s.n_zero;
      continue;
    }
    scratch /= nrm;
    s.sum_sign += scratch;
    s.sum_invnorm += 1.0 / nrm;
    if (want_usq) s.sum_usq += scratch.cwiseAbs2();
  }
}

void init_from_moments(const Eigen::Ref<const Matrix>& block, Vector& theta, Vector& d2) {
  const Index m = block.rows();
  theta = block.colwise().mean().transpose();
  Vector ss = (block.rowwise() - theta.transpose()).colwise().squaredNorm().transpose();
  d2 = ss / static_cast<double>(std::max<Index>(m - 1, 1));
  for (Index j = 0; j < d2.size(); ++j) {
    if (!(d2[j] > 0.0)) d2[j] = 1.0;  // constant coordinate; keep the scale usable
  }
}

}  // namespace

Vector spatial_sign(const Vector& x) {
  const double nrm = x.norm();
  if (nrm == 0.0) return Vector::Zero(x.size());
  return x / nrm;
}

HRFit hr_estimate(const DataMatrix& data, Index first, Index len, const ScanConfig& cfg,
                  const HRFit* warm_start) {
  if (len < 2) throw InputError("hr_estimate needs a segment of at least 2 observations");
  if (first < 0 || first + len > data.n()) throw InputError("hr_estimate: segment out of range");
  const auto block = data.values.middleRows(first, len);
  const Index p = data.p();
  const double m = static_cast<double>(len);

  HRFit fit;
  if (warm_start != nullptr && warm_start->theta.size() == p) {
    fit.theta = warm_start->theta;
    fit.d2 = warm_start->d2;
  } else {
    init_from_moments(block, fit.theta, fit.d2);
  }
  Vector dinv = fit.d2.cwiseSqrt().cwiseInverse();

  Vector scratch(p);
  StepSums sums;
  const double stall_tol = 1e-4 * cfg.hr_tolerance;

  for (;;) {
    accumulate(block, fit.theta, dinv, /*want_usq=*/true, scratch, sums);
    fit.residual_sign = sums.sum_sign.lpNorm<Eigen::Infinity>() / m;
    fit.residual_diag =
        ((static_cast<double>(p) / m) * sums.sum_usq.array() - 1.0).abs().maxCoeff();
    if (fit.residual_sign <= cfg.hr_tolerance && fit.residual_diag <= cfg.hr_tolerance) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= cfg.hr_max_iter || sums.sum_invnorm == 0.0) break;

    // Location step, then diagonal rescaling (steps (ii)/(iii) of the recursion).
    const Vector step = sums.sum_sign.cwiseQuotient(dinv) / sums.sum_invnorm;
    Vector d2_new = fit.d2.cwiseProduct((static_cast<double>(p) / m) * sums.sum_usq)
                        .cwiseMax(kMinDiag);
    const double theta_move = (step.cwiseProduct(dinv)).lpNorm<Eigen::Infinity>();
    const double d2_move = ((d2_new - fit.d2).cwiseQuotient(fit.d2)).lpNorm<Eigen::Infinity>();
    fit.theta += step;
    fit.d2 = std::move(d2_new);
    dinv = fit.d2.cwiseSqrt().cwiseInverse();
    ++fit.iterations;
    if (std::max(theta_move, d2_move) <= stall_tol) {
      // No further progress possible; report the residuals at the new iterate.
      accumulate(block, fit.theta, dinv, /*want_usq=*/true, scratch, sums);
      fit.residual_sign = sums.sum_sign.lpNorm<Eigen::Infinity>() / m;
      fit.residual_diag =
          ((static_cast<double>(p) / m) * sums.sum_usq.array() - 1.0).abs().maxCoeff();
      fit.converged =
          fit.residual_sign <= cfg.hr_tolerance && fit.residual_diag <= cfg.hr_tolerance;
      break;
    }
  }
  return fit;
}

LocationFit fit_location(const DataMatrix& data, Index first, Index len, const Vector& d2,
                         const ScanConfig& cfg, const Vector* warm_theta) {
  if (len < 1) throw InputError("fit_location needs a nonempty segment");
  if (first < 0 || first + len > data.n()) throw InputError("fit_location: segment out of range");
  const auto block = data.values.middleRows(first, len);
  const Index p = data.p();
  const double m = static_cast<double>(len);

  LocationFit fit;
  if (len == 1) {
    fit.theta = block.row(0).transpose();
    fit.converged = true;
    return fit;
  }
  fit.theta = (warm_theta != nullptr && warm_theta->size() == p)
                  ? *warm_theta
                  : Vector(block.colwise().mean().transpose());
  const Vector dinv = d2.cwiseSqrt().cwiseInverse();
  const Vector dsqrt = d2.cwiseSqrt();

  Vector scratch(p);
  StepSums sums;
  const double stall_tol = 1e-4 * cfg.hr_tolerance;

  for (;;) {
    accumulate(block, fit.theta, dinv, /*want_usq=*/false, scratch, sums);
    fit.residual_sign = sums.sum_sign.lpNorm<Eigen::Infinity>() / m;
    if (fit.residual_sign <= cfg.hr_tolerance) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= cfg.hr_max_iter || sums.sum_invnorm == 0.0) break;
    const Vector step = sums.sum_sign.cwiseProduct(dsqrt) / sums.sum_invnorm;
    fit.theta += step;
    ++fit.iterations;
    if ((step.cwiseProduct(dinv)).lpNorm<Eigen::Infinity>() <= stall_tol) {
      accumulate(block, fit.theta, dinv, /*want_usq=*/false, scratch, sums);
      fit.residual_sign = sums.sum_sign.lpNorm<Eigen::Infinity>() / m;
      fit.converged = fit.residual_sign <= cfg.hr_tolerance;
      break;
    }
  }
  return fit;
}

namespace {

// Mean inverse radius of one trimmed segment under the combined D_hat; exact
// zero residuals are dropped from the average (with a note on stderr).
double segment_inverse_radius(const DataMatrix& data, Index first, Index len, const Vector& theta,
                              const Vector& dinv) {
  double sum = 0.0;
  Index valid = 0;
  for (Index i = 0; i < len; ++i) {
    const double nrm =
        ((data.values.row(first + i).transpose() - theta).cwiseProduct(dinv)).norm();
    if (nrm <= kZeroResidual) {
      std::cerr << "signscan: observation " << (first + i + 1)
                << " coincides with its segment location; dropped from zeta1\n";
      continue;
    }
    sum += 1.0 / nrm;
    ++valid;
  }
  if (valid == 0) {
    throw CalibrationError("zeta1 undefined: every trimmed-segment observation sits at theta");
  }
  return sum / static_cast<double>(valid);
}

// p^2 / (2 m (m-1)) * sum_{i != j} (U_i^T U_j)^2 over one trimmed segment.
double segment_tr_r2(const DataMatrix& data, Index first, Index len, const Vector& theta,
                     const Vector& dinv) {
  const Index p = data.p();
  Matrix signs(len, p);
  Vector r(p);
  for (Index i = 0; i < len; ++i) {
    r = (data.values.row(first + i).transpose() - theta).cwiseProduct(dinv);
    const double nrm = r.norm();
    if (nrm <= kZeroResidual) {
      signs.row(i).setZero();
    } else {
      signs.row(i) = (r / nrm).transpose();
    }
  }
  const Eigen::MatrixXd gram = signs * signs.transpose();
  const double off_diag_sq = gram.squaredNorm() - gram.diagonal().squaredNorm();
  const double m = static_cast<double>(len);
  return static_cast<double>(p) * static_cast<double>(p) / (2.0 * m * (m - 1.0)) * off_diag_sq;
}

}  // namespace

NuisanceEstimates nuisance_estimates(const DataMatrix& data, const ScanConfig& cfg) {
  const Index n = data.n();
  const Index m = trim_length(cfg, n);
  if (m < 2) {
    throw InputError("trimmed segment too small: floor(rho*n)=" + std::to_string(m));
  }

  NuisanceEstimates out;
  out.fit_front = hr_estimate(data, 0, m, cfg);
  out.fit_back = hr_estimate(data, n - m, m, cfg);

  out.D_hat = 0.5 * (out.fit_front.d2 / out.fit_front.d2[0] + out.fit_back.d2 / out.fit_back.d2[0]);
  const Vector dinv = out.D_hat.cwiseSqrt().cwiseInverse();

  out.zeta1_hat = 0.5 * (segment_inverse_radius(data, 0, m, out.fit_front.theta, dinv) +
                         segment_inverse_radius(data, n - m, m, out.fit_back.theta, dinv));
  // Each segment term carries the factor 1/2, so the two add to one estimate.
  out.trR2_hat = segment_tr_r2(data, 0, m, out.fit_front.theta, dinv) +
                 segment_tr_r2(data, n - m, m, out.fit_back.theta, dinv);
  if (out.trR2_hat < 0.0) out.trR2_hat = 0.0;
  return out;
}

}  // namespace signscan

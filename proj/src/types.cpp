#include "signscan/types.hpp"

#include <cmath>
#include <sstream>

namespace signscan {

DataMatrix DataMatrix::from_values(Matrix m) {
  if (m.rows() < 4) {
    throw InputError("need at least 4 observations, got " + std::to_string(m.rows()));
  }
  if (m.cols() < 1) {
    throw InputError("need at least 1 coordinate per observation");
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        std::ostringstream os;
        os << "non-finite value at row " << (i + 1) << ", column " << (j + 1);
        throw InputError(os.str());
      }
    }
  }
  return DataMatrix{std::move(m)};
}

DataMatrix DataMatrix::rows(Index first, Index count) const {
  if (first < 0 || count < 1 || first + count > n()) {
    throw InputError("row range [" + std::to_string(first) + ", +" + std::to_string(count) +
                     ") out of bounds for n=" + std::to_string(n()));
  }
  return DataMatrix::from_values(values.middleRows(first, count));
}

Index floor_frac(double frac, Index n) {
  return static_cast<Index>(std::floor(frac * static_cast<double>(n) + 1e-9));
}

Index boundary_lambda(const ScanConfig& cfg, Index n) {
  Index lambda = floor_frac(cfg.boundary_fraction, n);
  if (cfg.lambda_cap) lambda = std::min(lambda, *cfg.lambda_cap);
  return lambda;
}

Index trim_length(const ScanConfig& cfg, Index n) {
  return floor_frac(cfg.trim_fraction, n);
}

void validate_window(const ScanConfig& cfg, Index n) {
  if (!(cfg.boundary_fraction > 0.0 && cfg.boundary_fraction < 0.5)) {
    throw InputError("boundary_fraction must lie in (0, 1/2)");
  }
  if (!(cfg.hr_tolerance > 0.0)) {
    throw InputError("hr_tolerance must be positive");
  }
  if (cfg.hr_max_iter < 1) {
    throw InputError("hr_max_iter must be at least 1");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw InputError("alpha must lie in (0, 1)");
  }
  if (cfg.lambda_cap && *cfg.lambda_cap < 1) {
    throw InputError("lambda cap must be at least 1");
  }
  const Index lambda = boundary_lambda(cfg, n);
  if (lambda < 1 || n - 2 * lambda < 1) {
    throw InputError("scan window empty: lambda=" + std::to_string(lambda) +
                     " leaves no interior points for n=" + std::to_string(n));
  }
}

void validate_trim(const ScanConfig& cfg, Index n) {
  if (!(cfg.trim_fraction > 0.0 && cfg.trim_fraction < 0.5)) {
    throw InputError("trim_fraction must lie in (0, 1/2)");
  }
  if (trim_length(cfg, n) < 2) {
    throw InputError("trimmed segment too small: floor(rho*n)=" +
                     std::to_string(trim_length(cfg, n)) + " < 2 for n=" + std::to_string(n));
  }
}

void validate_config(const ScanConfig& cfg, Index n) {
  validate_window(cfg, n);
  validate_trim(cfg, n);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::SMAX0: return "SMAX(0)";
    case Method::SSUM0: return "SSUM(0)";
    case Method::SCMS0: return "SCMS(0)";
    case Method::SMAX05: return "SMAX(0.5)";
    case Method::SSUM05: return "SSUM(0.5)";
    case Method::SCMS05: return "SCMS(0.5)";
    case Method::MEAN_BASELINE: return "MEAN";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "SMAX(0)" || name == "smax0") return Method::SMAX0;
  if (name == "SSUM(0)" || name == "ssum0") return Method::SSUM0;
  if (name == "SCMS(0)" || name == "scms0") return Method::SCMS0;
  if (name == "SMAX(0.5)" || name == "smax05") return Method::SMAX05;
  if (name == "SSUM(0.5)" || name == "ssum05") return Method::SSUM05;
  if (name == "SCMS(0.5)" || name == "scms05") return Method::SCMS05;
  if (name == "MEAN" || name == "mean" || name == "mean0") return Method::MEAN_BASELINE;
  return std::nullopt;
}

}  // namespace signscan

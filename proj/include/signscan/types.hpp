#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace signscan {

// Observations are rows; row-major storage keeps per-observation access contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data or configuration (CLI exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

// A null calibration formula is undefined for the given sizes, or a nuisance
// estimate degenerated (CLI exit code 3).
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// n observations of dimension p. Immutable after construction.
struct DataMatrix {
  Matrix values;  // n x p

  Index n() const { return values.rows(); }
  Index p() const { return values.cols(); }

  /// Validates n >= 4, p >= 1 and rejects NaN/Inf entries.
  static DataMatrix from_values(Matrix m);

  /// Contiguous sub-sequence of observations [first, first+count), re-validated.
  DataMatrix rows(Index first, Index count) const;
};

struct ScanConfig {
  double boundary_fraction = 0.2;  // lambda_n = floor(boundary_fraction * n)
  double trim_fraction = 0.2;      // rho; trimmed segments of length floor(rho * n)
  double hr_tolerance = 1e-6;
  int hr_max_iter = 200;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  int mc_grid = 1000;       // N_d
  long mc_reps = 100000;    // B
  // Absolute cap on the boundary parameter; used by binary segmentation so a
  // long interval keeps a fixed lambda while short intervals fall back to the
  // proportional rule.
  std::optional<Index> lambda_cap;
};

/// floor(frac * n), guarded against FP products like 0.2*200 landing a hair
/// below the integer.
Index floor_frac(double frac, Index n);

/// The boundary removal parameter for a sequence of length n. Single source of
/// truth for every module.
Index boundary_lambda(const ScanConfig& cfg, Index n);

/// Trimmed segment length floor(rho * n).
Index trim_length(const ScanConfig& cfg, Index n);

/// Throws InputError when a parameter is out of range or the scan window
/// [lambda, n-lambda] is empty.
void validate_window(const ScanConfig& cfg, Index n);

/// Throws InputError when the trimmed segments floor(rho*n) are shorter than 2.
void validate_trim(const ScanConfig& cfg, Index n);

/// Both checks; the full test pipeline needs a valid window and valid trim.
void validate_config(const ScanConfig& cfg, Index n);

enum class Method {
  SMAX0,
  SSUM0,
  SCMS0,
  SMAX05,
  SSUM05,
  SCMS05,
  MEAN_BASELINE,
};

const char* method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

}  // namespace signscan

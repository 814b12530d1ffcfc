#include <doctest.h>

#include "signscan/inference.hpp"
#include "signscan/parallel.hpp"
#include "signscan/rng.hpp"
#include "signscan/simulate.hpp"

#include <Eigen/Cholesky>
#include <array>
#include <cmath>
#include <filesystem>
#include <random>

using namespace signscan;

namespace {

// Composite Simpson quadrature of the chi-squared(4) density x e^{-x/2} / 4.
double chi2_4_by_quadrature(double upper) {
  const int steps = 20000;  // even
  const double h = upper / steps;
  auto f = [](double x) { return 0.25 * x * std::exp(-0.5 * x); };
  double acc = f(0.0) + f(upper);
  for (int i = 1; i < steps; ++i) acc += f(i * h) * (i % 2 == 0 ? 2.0 : 4.0);
  return acc * h / 3.0;
}

NuisanceEstimates unit_nuisances(Index p) {
  NuisanceEstimates nuis;
  nuis.D_hat = Vector::Ones(p);
  nuis.zeta1_hat = 1.0;
  nuis.trR2_hat = 1.0;
  nuis.fit_front.converged = true;
  nuis.fit_back.converged = true;
  return nuis;
}

FVTable tiny_fv() { return simulate_fv(100, 2000, 42, 1); }

}  // namespace

TEST_CASE("closed-form distribution values") {
  CHECK(gumbel_cdf(0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(gumbel2_cdf(0.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(chi2_4_cdf(0.0) == 0.0);
  CHECK(chi2_4_cdf(-3.0) == 0.0);
  for (const double x : {0.5, 2.0, 4.7, 10.0, 18.42}) {
    CHECK(chi2_4_cdf(x) == doctest::Approx(chi2_4_by_quadrature(x)).epsilon(1e-10));
  }
}

TEST_CASE("extreme-value normalization constants and guard") {
  CHECK_THROWS_AS(gumbel_params(std::exp(1.0)), CalibrationError);
  CHECK_THROWS_AS(gumbel_params(2.0), CalibrationError);
  CHECK_THROWS_AS(gumbel_params(-1.0), CalibrationError);
  const GumbelParams params = gumbel_params(16.0);
  CHECK(params.A == doctest::Approx(std::sqrt(2.0 * std::log(16.0))).epsilon(1e-15));
  CHECK(params.D == doctest::Approx(2.0 * std::log(16.0) + 0.5 * std::log(std::log(16.0)) -
                                    0.5 * std::log(std::acos(-1.0)))
                        .epsilon(1e-15));
}

TEST_CASE("boundary h_n arithmetic and guard") {
  CHECK(boundary_h_n(200, 40) == 16.0);  // lambda/n = 0.2 gives (5-1)^2
  CHECK(boundary_h_n(1000, 200) == 16.0);
  CHECK_THROWS_AS(boundary_h_n(100, 50), CalibrationError);  // lambda/n = 1/2
}

TEST_CASE("fisher combination closed form") {
  CHECK(fisher_combine(1.0, 1.0) == 1.0);
  CHECK(fisher_combine(0.5, 0.5) == doctest::Approx(0.5965735902799727).epsilon(1e-12));
  CHECK(fisher_combine(0.01, 0.01) == doctest::Approx(1.0210340371976183e-3).epsilon(1e-10));
  CHECK(fisher_combine(0.01, 0.01) < 0.01);
  CHECK(fisher_combine(1e-300, 1.0) < 1e-290);
  // symmetry and monotonicity
  CHECK(fisher_combine(0.03, 0.4) == fisher_combine(0.4, 0.03));
  double prev = 1.1;
  for (const double p1 : {1.0, 0.5, 0.1, 0.01, 1e-4}) {
    const double combined = fisher_combine(p1, 0.2);
    CHECK(combined < prev);
    prev = combined;
  }
}

TEST_CASE("F_V path has the advertised covariance at the midpoint") {
  const int N_d = 100;
  const int B = 20000;
  double sum = 0.0, sum_sq = 0.0;
  Vector path;
  for (int b = 0; b < B; ++b) {
    auto rng = make_engine(5, static_cast<std::uint64_t>(b));
    detail::fv_path(rng, N_d, path);
    const double v = path[N_d / 2 - 1];  // t = 0.5
    sum += v;
    sum_sq += v * v;
    CHECK(path[N_d - 1] == 0.0);  // V(1) degenerate
  }
  const double mean = sum / B;
  const double var = sum_sq / B - mean * mean;
  // Var V(0.5) = (0.5)^2 (0.5)^2 = 0.0625; the sample variance of a Gaussian
  // has sd sigma^2 sqrt(2/B).
  const double se = 0.0625 * std::sqrt(2.0 / B);
  CHECK(std::abs(var - 0.0625) <= 3.0 * se);
  CHECK(std::abs(mean) <= 3.0 * 0.25 / std::sqrt(static_cast<double>(B)));
}

TEST_CASE("time-change sampler agrees with the dense-covariance construction") {
  // Dense route: covariance (1 - t_max)^2 t_min^2 on a coarse grid, Cholesky.
  const int N_d = 50;
  const int B = 40000;
  Eigen::MatrixXd cov(N_d - 1, N_d - 1);
  for (int j = 1; j < N_d; ++j) {
    for (int l = 1; l < N_d; ++l) {
      const double tj = static_cast<double>(j) / N_d;
      const double tl = static_cast<double>(l) / N_d;
      const double hi = std::max(tj, tl);
      const double lo = std::min(tj, tl);
      cov(j - 1, l - 1) = (1.0 - hi) * (1.0 - hi) * lo * lo;
    }
  }
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  std::vector<double> dense(B);
  Eigen::VectorXd z(N_d - 1);
  for (int b = 0; b < B; ++b) {
    for (int i = 0; i < N_d - 1; ++i) z[i] = normal(rng);
    dense[b] = std::max(0.0, (chol * z).maxCoeff());
  }
  std::sort(dense.begin(), dense.end());

  const FVTable table = simulate_fv(N_d, B, 1234, 1);
  auto quantile = [](const std::vector<double>& v, double q) {
    return v[static_cast<std::size_t>(q * (v.size() - 1))];
  };
  CHECK(std::abs(quantile(dense, 0.5) - table.quantile(0.5)) < 0.02);
  CHECK(std::abs(quantile(dense, 0.95) - table.quantile(0.95)) < 0.03);
  const double dense_mean =
      std::accumulate(dense.begin(), dense.end(), 0.0) / static_cast<double>(B);
  const double tc_mean =
      std::accumulate(table.samples.begin(), table.samples.end(), 0.0) / static_cast<double>(B);
  CHECK(std::abs(dense_mean - tc_mean) < 0.01);
}

TEST_CASE("F_V table basics") {
  const FVTable table = tiny_fv();
  REQUIRE(table.samples.size() == 2000);
  CHECK(std::is_sorted(table.samples.begin(), table.samples.end()));
  CHECK(table.ecdf(table.samples.back()) == 1.0);
  CHECK(table.ecdf(table.samples.front() - 1.0) == 0.0);
  CHECK(table.quantile(0.90) <= table.quantile(0.95));
  CHECK(table.quantile(0.95) <= table.quantile(0.99));
  // every max dominates V(1) = 0
  CHECK(table.samples.front() >= 0.0);
}

TEST_CASE("F_V generation is deterministic and scheduling-independent") {
  const FVTable a = simulate_fv(100, 2000, 7, 1);
  const FVTable b = simulate_fv(100, 2000, 7, 2);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("F_V table round-trips through its cache file") {
  const FVTable table = tiny_fv();
  const std::string path =
      (std::filesystem::temp_directory_path() / "signscan_fv_test.bin").string();
  save_fv_table(table, path);
  const FVTable back = load_fv_table(path);
  CHECK(back.grid == table.grid);
  CHECK(back.reps == table.reps);
  CHECK(back.seed == table.seed);
  REQUIRE(back.samples.size() == table.samples.size());
  for (std::size_t i = 0; i < table.samples.size(); ++i) {
    CHECK(back.samples[i] == table.samples[i]);  // bitwise
  }
}

TEST_CASE("max-L2 statistic matches the hand-computed toy value") {
  Matrix m(4, 1);
  m << -2.0, -1.0, 1.0, 2.0;
  const DataMatrix data = DataMatrix::from_values(m);
  ScanConfig cfg;
  cfg.boundary_fraction = 0.25;  // lambda = 1
  const FVTable fv = tiny_fv();
  const TestOutcome out = max_l2_test(data, unit_nuisances(1), 0.0, cfg, &fv);
  CHECK(out.statistic == 0.375);  // exact in floating point
  CHECK(out.p_value >= 0.0);
  CHECK(out.p_value <= 1.0);
}

TEST_CASE("statistic below every F_V sample gives p-value one") {
  FVTable fv;
  fv.grid = 10;
  fv.reps = 4;
  fv.seed = 0;
  fv.samples = {0.5, 0.6, 0.7, 0.8};
  CHECK(1.0 - fv.ecdf(0.1) == 1.0);
}

TEST_CASE("gamma=0.5 calibrations reject too-small arguments") {
  // p = 1 and lambda/n = 0.25 give p*log(h_n) = log(9) < e.
  Matrix m(40, 1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (Index i = 0; i < 40; ++i) m(i, 0) = normal(rng);
  const DataMatrix data = DataMatrix::from_values(m);
  ScanConfig cfg;
  cfg.boundary_fraction = 0.25;
  CHECK_THROWS_AS(max_linf_test(data, unit_nuisances(1), 0.5, cfg), CalibrationError);
  // log(n^2 / lambda^2) = log((40/12)^2) = 2.41 < e for the sign statistic.
  ScanConfig cfg2;
  cfg2.boundary_fraction = 0.3;
  CHECK_THROWS_AS(max_l2_test(data, unit_nuisances(1), 0.5, cfg2, nullptr), CalibrationError);
}

TEST_CASE("max-L2 with gamma=0 requires a table and positive tr(R^2)") {
  const DataMatrix data = DataMatrix::from_values(Matrix::Random(30, 3));
  ScanConfig cfg;
  CHECK_THROWS_AS(max_l2_test(data, unit_nuisances(3), 0.0, cfg, nullptr), InputError);
  NuisanceEstimates bad = unit_nuisances(3);
  bad.trR2_hat = 0.0;
  const FVTable fv = tiny_fv();
  CHECK_THROWS_AS(max_l2_test(data, bad, 0.0, cfg, &fv), CalibrationError);
}

TEST_CASE("a strong change increases statistics and decreases p-values") {
  ScenarioSpec null_spec;
  null_spec.n = 100;
  null_spec.p = 20;
  null_spec.seed = 31;
  ScenarioSpec alt_spec = null_spec;
  alt_spec.tau = 50;
  alt_spec.delta = 30.0;
  const DataMatrix null_data = generate(null_spec);
  const DataMatrix alt_data = generate(alt_spec);
  ScanConfig cfg;
  const FVTable fv = tiny_fv();
  const MethodSet null_set = evaluate_all(null_data, cfg, &fv, true);
  const MethodSet alt_set = evaluate_all(alt_data, cfg, &fv, true);
  for (const Method m : {Method::SMAX0, Method::SSUM0, Method::SMAX05, Method::SSUM05}) {
    CHECK(alt_set.by_method(m).statistic > null_set.by_method(m).statistic);
    CHECK(alt_set.by_method(m).p_value <= null_set.by_method(m).p_value);
  }
  CHECK(alt_set.g0.combined.p_value < null_set.g0.combined.p_value);
  // The combined p-value never exceeds 1 and the argmax sits in the window.
  for (const Method m : {Method::SMAX0, Method::SSUM0, Method::SCMS0, Method::SMAX05,
                         Method::SSUM05, Method::SCMS05}) {
    const TestOutcome& out = alt_set.by_method(m);
    CHECK(out.p_value >= 0.0);
    CHECK(out.p_value <= 1.0);
    REQUIRE(out.k_argmax.has_value());
    CHECK(*out.k_argmax >= 20);
    CHECK(*out.k_argmax <= 80);
  }
}

TEST_CASE("pipeline p-values are invariant under affine rescaling") {
  ScenarioSpec spec;
  spec.n = 60;
  spec.p = 8;
  spec.seed = 13;
  const DataMatrix data = generate(spec);
  Matrix shifted = data.values;
  Vector scale(8), shift(8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  for (Index j = 0; j < 8; ++j) {
    scale[j] = u(rng);
    shift[j] = 10.0 * u(rng) - 15.0;
    shifted.col(j) = scale[j] * data.values.col(j).array() + shift[j];
  }
  ScanConfig cfg;
  const FVTable fv = tiny_fv();
  const MethodSet a = evaluate_all(data, cfg, &fv, false);
  const MethodSet b = evaluate_all(DataMatrix::from_values(shifted), cfg, &fv, false);
  for (const Method m : {Method::SMAX0, Method::SSUM0, Method::SCMS0, Method::SMAX05,
                         Method::SSUM05, Method::SCMS05}) {
    CHECK(a.by_method(m).p_value == doctest::Approx(b.by_method(m).p_value).epsilon(1e-6));
  }
}

TEST_CASE("null rejection rates track the level across alphas") {
  // Scenario I, (200,100), 500 replicates: each method's size at
  // alpha in {0.01, 0.05, 0.10} within 3 binomial SEs + 1.5pp of the level
  // (the 5% row of the reference table sits within that band of nominal too).
  const FVTable fv = simulate_fv(500, 20000, 3, 0);
  ScanConfig cfg;
  const int reps = 500;
  std::vector<std::array<double, 6>> pvals(reps);
  const std::array<Method, 6> methods = {Method::SMAX0,  Method::SSUM0,  Method::SCMS0,
                                         Method::SMAX05, Method::SSUM05, Method::SCMS05};
  parallel_for(reps, 0, [&](long r) {
    ScenarioSpec spec;
    spec.n = 200;
    spec.p = 100;
    spec.seed = derive_seed(98765, static_cast<std::uint64_t>(r));
    const MethodSet set = evaluate_all(generate(spec), cfg, &fv, false);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      pvals[static_cast<std::size_t>(r)][m] = set.by_method(methods[m]).p_value;
    }
  });
  for (const double alpha : {0.01, 0.05, 0.10}) {
    const double band = 3.0 * std::sqrt(alpha * (1.0 - alpha) / reps) + 0.015;
    for (std::size_t m = 0; m < methods.size(); ++m) {
      int hits = 0;
      for (int r = 0; r < reps; ++r) hits += pvals[static_cast<std::size_t>(r)][m] < alpha;
      const double rate = static_cast<double>(hits) / reps;
      INFO(method_name(methods[m]) << " at alpha " << alpha << ": " << rate);
      CHECK(std::abs(rate - alpha) <= band);
    }
  }
}

TEST_CASE("adaptive test shares one nuisance estimate and combines correctly") {
  ScenarioSpec spec;
  spec.n = 80;
  spec.p = 10;
  spec.seed = 77;
  const DataMatrix data = generate(spec);
  ScanConfig cfg;
  const FVTable fv = tiny_fv();
  const AdaptiveOutcome out = adaptive_test(data, cfg, Variant::GAMMA0, &fv);
  CHECK(out.combined.p_value ==
        doctest::Approx(fisher_combine(out.linf.p_value, out.l2.p_value)).epsilon(1e-14));
  CHECK(out.combined.method == Method::SCMS0);
  const Index expected =
      out.linf.p_value < out.l2.p_value ? *out.linf.k_argmax : *out.l2.k_argmax;
  CHECK(*out.combined.k_argmax == expected);
  // identical nuisance snapshot on both components
  CHECK(out.linf.nuisances->zeta1_hat == out.l2.nuisances->zeta1_hat);
}

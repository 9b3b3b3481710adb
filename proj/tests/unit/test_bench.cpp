#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "streamrobust/bench.hpp"
#include "test_support.hpp"

namespace sr = streamrobust;

namespace {

sr::ExperimentConfig small_config() {
  sr::ExperimentConfig c;
  c.seed = 99;
  c.replications = 3;
  c.passes = 2;
  c.dimension = 4;
  c.samples = 2000;
  c.covariances = {sr::CovarianceChoice::Identity};
  c.contamination = {sr::ContaminationPreset::ThreePopulation, 0.6, 1000.0, 1.0, 10.0};
  c.tau_grid = {0.1, 1.0, 10.0};
  c.eta_grid = {0.1, 0.3, 0.5};
  return c;
}

const sr::ConvergenceTable& find(const sr::ConvergenceResult& r, const std::string& est,
                                 const std::string& cov = "identity") {
  for (const auto& t : r.tables) {
    if (t.estimator == est && t.covariance == cov) return t;
  }
  throw std::runtime_error("no table " + est);
}

}  // namespace

TEST(FitRateSlope, ExactPowerLaws) {
  std::vector<std::uint64_t> n;
  std::vector<double> inv, inv_sqrt;
  for (double v = 1; v <= 1e5; v *= 1.25) {
    n.push_back(static_cast<std::uint64_t>(std::ceil(v)));
    inv.push_back(3.0 / static_cast<double>(n.back()));
    inv_sqrt.push_back(2.0 / std::sqrt(static_cast<double>(n.back())));
  }
  const auto a = sr::fit_rate_slope(n, inv);
  EXPECT_NEAR(a.slope, -1.0, 1e-12);
  EXPECT_NEAR(a.r2, 1.0, 1e-12);
  EXPECT_NEAR(a.intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(sr::fit_rate_slope(n, inv_sqrt).slope, -0.5, 1e-12);
}

TEST(FitRateSlope, UsesTrailingWindowInLogN) {
  // Slope -2 below n = 10, slope -1 above: the trailing half sees -1 only.
  std::vector<std::uint64_t> n;
  std::vector<double> err;
  for (std::uint64_t v = 1; v <= 10000; v = v * 5 / 4 + 1) {
    n.push_back(v);
    const double x = static_cast<double>(v);
    err.push_back(x < 10 ? 1e2 / (x * x) : 1e1 / x);
  }
  EXPECT_NEAR(sr::fit_rate_slope(n, err, 0.5).slope, -1.0, 1e-12);
}

TEST(FitRateSlope, RejectsDegenerateInput) {
  const std::vector<std::uint64_t> four{10, 100, 1000, 10000};
  const std::vector<double> e4{1, 1, 1, 1};
  EXPECT_THROW(sr::fit_rate_slope(four, e4, 1.0), std::invalid_argument);
  const std::vector<std::uint64_t> same{5, 5, 5, 5, 5};
  const std::vector<double> e5{1, 2, 3, 4, 5};
  EXPECT_THROW(sr::fit_rate_slope(same, e5, 1.0), std::invalid_argument);
  const std::vector<std::uint64_t> five{1, 2, 3, 4, 5};
  const std::vector<double> zero{1, 1, 0, 1, 1};
  EXPECT_THROW(sr::fit_rate_slope(five, zero, 1.0), std::invalid_argument);
  EXPECT_THROW(sr::fit_rate_slope(five, e5, 0.0), std::invalid_argument);
}

TEST(SelectTau, ArgminWithTiesToSmaller) {
  const std::vector<double> grid{0.1, 1.0, 10.0};
  EXPECT_EQ(sr::select_tau(grid, std::vector<double>{3, 1, 2}), 1.0);
  EXPECT_EQ(sr::select_tau(grid, std::vector<double>{2, 1, 1}), 1.0);
  const std::vector<double> unsorted{10.0, 0.1};
  EXPECT_EQ(sr::select_tau(unsorted, std::vector<double>{1, 1}), 0.1);
  const std::vector<double> single{4.2};
  EXPECT_EQ(sr::select_tau(single, std::vector<double>{7}), 4.2);
  EXPECT_THROW(sr::select_tau(grid, std::vector<double>{1}), std::invalid_argument);
}

TEST(TuneHuberTau, SingletonGridAndArgminContract) {
  const auto config = small_config();
  const std::vector<double> single{0.37};
  EXPECT_EQ(sr::tune_huber_tau(config, single, sr::CovarianceChoice::Identity).tau, 0.37);

  const std::vector<double> grid{1e-2, 1e-1, 1.0, 1e1, 1e2};
  const auto tuned = sr::tune_huber_tau(config, grid, sr::CovarianceChoice::Identity);
  ASSERT_EQ(tuned.mean_final_err.size(), grid.size());
  const auto chosen = std::find(grid.begin(), grid.end(), tuned.tau) - grid.begin();
  for (double e : tuned.mean_final_err) EXPECT_LE(tuned.mean_final_err[chosen], e);
}

TEST(TuneHuberTau, CleanDataPicksLowestMeasured) {
  auto config = small_config();
  config.contamination = {sr::ContaminationPreset::None, 0.0, 0, 1, 10};
  const std::vector<double> grid{1e-3, 1.0, 1e3};
  const auto tuned = sr::tune_huber_tau(config, grid, sr::CovarianceChoice::Identity);
  const auto best = std::min_element(tuned.mean_final_err.begin(), tuned.mean_final_err.end());
  EXPECT_EQ(tuned.tau, grid[best - tuned.mean_final_err.begin()]);
}

TEST(Aggregate, PureReductionIsBitIdentical) {
  auto config = small_config();
  config.estimators = {sr::EstimatorKind::L1};
  const auto result = sr::convergence_experiment(config);
  const auto& t = result.tables.front();
  const auto again = sr::aggregate(t.estimator, t.covariance, t.runs);
  EXPECT_EQ(again.n, t.n);
  EXPECT_EQ(again.mean_err_h, t.mean_err_h);
  EXPECT_EQ(again.mean_err_2, t.mean_err_2);
  EXPECT_EQ(again.mean_err_last_h, t.mean_err_last_h);

  auto broken = t.runs;
  broken[1].checkpoints.pop_back();
  EXPECT_THROW(sr::aggregate("l1", "identity", broken), std::invalid_argument);
  EXPECT_THROW(sr::aggregate("l1", "identity", {}), std::invalid_argument);
}

TEST(ConvergenceExperiment, TableCountAndDeterminism) {
  auto config = small_config();
  config.covariances = {sr::CovarianceChoice::Identity, sr::CovarianceChoice::InverseK};
  const auto a = sr::convergence_experiment(config, 1);
  const auto b = sr::convergence_experiment(config, 3);
  ASSERT_EQ(a.tables.size(), 8u);
  ASSERT_EQ(a.tau_opt.size(), 2u);
  EXPECT_EQ(a.seeds.size(), 6u);
  for (std::size_t i = 0; i < a.tables.size(); ++i) {
    EXPECT_EQ(a.tables[i].mean_err_h, b.tables[i].mean_err_h);
  }
  EXPECT_EQ(a.tables.front().n.back(), config.steps());
}

TEST(ConvergenceExperiment, OracleConvergesOnCleanData) {
  auto config = small_config();
  config.dimension = 10;
  config.samples = 10000;
  config.passes = 1;
  config.contamination = {sr::ContaminationPreset::None, 0.0, 0, 1, 10};
  config.estimators = {sr::EstimatorKind::Oracle, sr::EstimatorKind::L1, sr::EstimatorKind::L2,
                       sr::EstimatorKind::Huber};
  const auto r = sr::convergence_experiment(config);
  const auto& oracle = find(r, "oracle");
  EXPECT_LT(oracle.mean_err_h.back(), oracle.mean_err_h.front() / 10);
  // Without corruption every estimator lands within 10x of the oracle.
  for (const auto& t : r.tables) EXPECT_LT(t.mean_err_h.back(), 10 * oracle.mean_err_h.back()) << t.estimator;
}

TEST(ConvergenceExperiment, L2IsNotCompetitiveUnderThreePopulation) {
  auto config = small_config();
  config.estimators = {sr::EstimatorKind::L1, sr::EstimatorKind::L2};
  const auto r = sr::convergence_experiment(config);
  EXPECT_GE(find(r, "l2").mean_err_h.back(), 10 * find(r, "l1").mean_err_h.back());
}

TEST(ConvergenceExperiment, HuberMultipliersExpandTables) {
  auto config = small_config();
  config.estimators = {sr::EstimatorKind::Huber};
  config.huber_tau = 2.0;
  config.huber_multipliers = {0.2, 1.0, 5.0};
  const auto r = sr::convergence_experiment(config);
  ASSERT_EQ(r.tables.size(), 3u);
  EXPECT_EQ(r.tables[0].estimator, "huber_x0.2");
  EXPECT_EQ(r.tables[2].estimator, "huber_x5");
  EXPECT_EQ(r.tau_opt, std::vector<double>{2.0});
}

TEST(ConvergenceExperiment, StreamingMode) {
  auto config = small_config();
  config.passes = 0;
  config.estimators = {sr::EstimatorKind::L1, sr::EstimatorKind::Oracle};
  const auto r = sr::convergence_experiment(config);
  EXPECT_EQ(r.tables.front().n.back(), config.samples);
}

TEST(BreakdownExperiment, ShapeAndOrdering) {
  const auto config = small_config();
  const auto r = sr::breakdown_experiment(config);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.estimators, (std::vector<std::string>{"l1", "l2", "huber_x1", "huber_x30", "oracle"}));
  for (const auto& row : r.rows) {
    ASSERT_EQ(row.final_err_h.size(), 5u);
    EXPECT_GT(row.tau_opt, 0.0);
  }
  EXPECT_EQ(r.seeds.size(), 9u);

  auto empty = config;
  empty.eta_grid.clear();
  EXPECT_THROW(sr::breakdown_experiment(empty), std::invalid_argument);
}

TEST(ExperimentConfig, ValidationListsEveryProblem) {
  sr::ExperimentConfig c;
  c.replications = 0;
  c.sigma = -1;
  c.covariances.clear();
  c.contamination.eta = 1.5;
  c.checkpoint_ratio = 1.0;
  c.tau_grid = {1.0, -2.0};
  c.quadrature_order = 4;
  const auto errors = c.validate();
  EXPECT_GE(errors.size(), 7u);
  EXPECT_TRUE(sr::ExperimentConfig{}.validate().empty());
}

TEST(ExperimentConfig, DigestTracksEveryField) {
  const sr::ExperimentConfig base;
  auto changed = base;
  EXPECT_EQ(base.digest(), changed.digest());
  changed.seed = 2;
  EXPECT_NE(base.digest(), changed.digest());
  changed = base;
  changed.tau_grid.push_back(1e4);
  EXPECT_NE(base.digest(), changed.digest());
}

TEST(ReplicationModel, SeededThetaAndSharedBasis) {
  const auto config = small_config();
  const auto a = sr::replication_model(config, sr::CovarianceChoice::InverseK, 0.3, 0);
  const auto b = sr::replication_model(config, sr::CovarianceChoice::InverseK, 0.3, 1);
  EXPECT_NEAR(a.theta_star().norm(), config.theta_norm, 1e-14);
  EXPECT_NE(a.theta_star(), b.theta_star());
  EXPECT_EQ(a.covariance().h, b.covariance().h);
  EXPECT_NEAR(a.covariance().r2, 1 + 0.5 + 1.0 / 3 + 0.25, 1e-12);
  EXPECT_EQ(sr::resolve_gamma0(config, a.covariance()), 1 / a.covariance().r2);
}

TEST(CountInversions, Counts) {
  EXPECT_EQ(sr::count_inversions(std::vector<double>{1, 2, 3}), 0u);
  EXPECT_EQ(sr::count_inversions(std::vector<double>{1, 3, 2, 4, 1}), 2u);
}

TEST(Tables, Headers) {
  auto config = small_config();
  config.estimators = {sr::EstimatorKind::L1};
  const auto r = sr::convergence_experiment(config);
  std::ostringstream out;
  sr::write_convergence_table(out, r.tables.front(), config);
  EXPECT_NE(out.str().find("\nn,mean_err_H,mean_err_2,mean_err_last_H\n"), std::string::npos);
  EXPECT_EQ(out.str().rfind("# estimator=l1\n", 0), 0u);
}

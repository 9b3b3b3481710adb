#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "streamrobust/analytic.hpp"
#include "test_support.hpp"

namespace sr = streamrobust;
using sr::testing::identity_model;
using sr::testing::kSqrt2OverPi;
using sr::testing::vec;

namespace {

sr::RegressionModel shifted(const sr::RegressionModel& m, const sr::Vector& theta_star) {
  return m.with_theta_star(theta_star);
}

// Direction u with |u|_H = 1.
sr::Vector h_unit(const sr::RegressionModel& m, sr::CounterRng& rng) {
  sr::Vector v(static_cast<Eigen::Index>(m.dimension()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v / std::sqrt(v.dot(m.covariance().h * v));
}

}  // namespace

TEST(PredErrorSigma, Examples) {
  const sr::SmoothedObjective id(shifted(identity_model(2, 1.0), vec({1.0, 1.0})));
  EXPECT_EQ(id.pred_error_sigma(vec({1.0, 1.0})), 0.0);
  EXPECT_DOUBLE_EQ(id.pred_error_sigma(vec({4.0, 5.0})), 5.0);

  sr::Matrix h(2, 2);
  h << 2.0, 0.0, 0.0, 1.0;
  const sr::SmoothedObjective diag(
      sr::RegressionModel(vec({0.0, 0.0}), sr::ExplicitCovariance{h}, 1.0, {}));
  EXPECT_NEAR(diag.pred_error_sigma(vec({1.0, 0.0})), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(diag.pred_error_sigma(vec({1.0})), std::invalid_argument);
}

TEST(OutlierGaussMoment, PointMasses) {
  EXPECT_DOUBLE_EQ(sr::outlier_gauss_moment(sr::OutlierDistribution::point_mass(0.3, 0.0), 1.0),
                   1.0);
  for (double v : {0.5, 2.0, 7.0}) {
    for (double s : {0.3, 1.0, 4.0}) {
      EXPECT_NEAR(sr::outlier_gauss_moment(sr::OutlierDistribution::point_mass(0.3, v), s),
                  std::exp(-v * v / (2 * s * s)), 1e-15);
    }
  }
}

TEST(OutlierGaussMoment, UniformMatchesAdaptiveKronrod) {
  using boost::math::quadrature::gauss_kronrod;
  auto oracle = [](double lo, double hi, double s) {
    const double integral = gauss_kronrod<double, 61>::integrate(
        [s](double b) { return std::exp(-b * b / (2 * s * s)); }, lo, hi, 20, 1e-15);
    return integral / (hi - lo);
  };
  EXPECT_NEAR(sr::outlier_gauss_moment(sr::OutlierDistribution::uniform(0.5, 1.0, 10.0), 1.0),
              oracle(1.0, 10.0, 1.0), 1e-10);
  // Wide interval, narrow Gaussian factor, and an interval straddling zero.
  EXPECT_NEAR(sr::outlier_gauss_moment(sr::OutlierDistribution::uniform(0.5, -3.0, 1000.0), 0.5),
              oracle(-3.0, 1000.0, 0.5), 1e-10);
  EXPECT_NEAR(sr::outlier_gauss_moment(sr::OutlierDistribution::uniform(0.5, 2.0, 3.0), 20.0),
              oracle(2.0, 3.0, 20.0), 1e-12);
}

TEST(EffectiveEta, Examples) {
  EXPECT_EQ(sr::effective_eta(sr::OutlierDistribution{}, 1.0), 0.0);
  EXPECT_NEAR(sr::effective_eta(sr::OutlierDistribution::point_mass(0.5, 1000.0), 1.0), 0.5, 1e-15);
  const double sigma = 1.7;
  const double v = sigma * std::sqrt(2.0 * std::log(2.0));
  EXPECT_NEAR(sr::effective_eta(sr::OutlierDistribution::point_mass(0.4, v), sigma), 0.2, 1e-15);
}

TEST(EffectiveEta, LiesBelowEta) {
  sr::CounterRng rng(31);
  for (int i = 0; i < 50; ++i) {
    const auto m = sr::testing::random_model(rng);
    const double e = sr::effective_eta(m.outliers(), m.sigma());
    EXPECT_GE(e, 0.0);
    EXPECT_LT(e, m.outliers().eta());
  }
}

TEST(ExpectedLoss, CleanClosedForms) {
  const sr::SmoothedObjective f(identity_model(3, 1.0));
  EXPECT_NEAR(f.expected_loss(vec({0, 0, 0})), kSqrt2OverPi, 1e-15);
  EXPECT_NEAR(f.expected_loss(vec({1, 0, 0})), kSqrt2OverPi * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(f.loss_at(1.0), 1.1283791671, 1e-10);
}

TEST(ExpectedLoss, MatchesDirectMonteCarloWithPointMass) {
  // E|eps + b - sigma_theta g| with g, eps ~ N(0,1), b = 5 w.p. 0.3.
  const sr::SmoothedObjective f(identity_model(1, 1.0, sr::OutlierDistribution::point_mass(0.3, 5.0)));
  sr::CounterRng rng(123);
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double b = rng.uniform() < 0.3 ? 5.0 : 0.0;
    const double v = std::abs(rng.normal() + b - 2.0 * rng.normal());
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(f.loss_at(2.0) - mean), 3.0 * se);
}

TEST(ExpectedLoss, BoundedBelowBySmoothedNoise) {
  sr::CounterRng rng(4);
  for (int i = 0; i < 30; ++i) {
    const auto m = sr::testing::random_model(rng);
    const sr::SmoothedObjective f(m);
    const sr::Vector theta = m.theta_star() + rng.uniform(0.0, 3.0) * h_unit(m, rng);
    EXPECT_GE(f.expected_loss(theta), kSqrt2OverPi * m.sigma() * (1 - 1e-15));
  }
}

TEST(Alpha, Examples) {
  const sr::SmoothedObjective f(identity_model(2, 1.0));
  EXPECT_NEAR(f.alpha(0.0), kSqrt2OverPi, 1e-15);
  EXPECT_NEAR(f.alpha(1.0), 0.5641895835, 1e-10);
  EXPECT_THROW(f.alpha(-1.0), std::invalid_argument);
}

TEST(Alpha, AtZeroMatchesEffectiveEta) {
  sr::CounterRng rng(9);
  for (int i = 0; i < 20; ++i) {
    const sr::SmoothedObjective f(sr::testing::random_model(rng));
    const double sigma = f.model().sigma();
    EXPECT_NEAR(f.alpha(0.0), kSqrt2OverPi * (1 - f.effective_eta()) / sigma, 1e-13);
  }
}

TEST(Alpha, MatchesDerivativeOfMonteCarloLossAlongCoordinate) {
  // alpha(0) is the curvature of f at theta*: estimate f(theta* + t e1) by
  // Monte Carlo with common random numbers and take a second difference.
  const auto model = identity_model(1, 1.0, sr::OutlierDistribution::point_mass(0.5, 2.0));
  const sr::SmoothedObjective f(model);
  const double t = 0.5;
  sr::CounterRng rng(77);
  const int n = 2000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    const double r = rng.normal() + (rng.uniform() < 0.5 ? 2.0 : 0.0);
    const double v = (std::abs(r - t * x) - 2 * std::abs(r) + std::abs(r + t * x)) / (t * t);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / n);
  const double exact = (f.loss_at(t) - 2 * f.loss_at(0.0) + f.loss_at(t)) / (t * t);
  EXPECT_LT(std::abs(mean - exact), 4.0 * se);
  // And the exact second difference approaches alpha(0) as t shrinks.
  const double small = 1e-3;
  EXPECT_NEAR(2 * f.excess_loss_at(small) / (small * small), f.alpha(0.0), 1e-6);
}

TEST(Gradient, Examples) {
  const sr::SmoothedObjective f(identity_model(3, 1.0));
  EXPECT_EQ(f.gradient(vec({0, 0, 0})), vec({0, 0, 0}));
  const sr::Vector g = f.gradient(vec({1, 0, 0}));
  EXPECT_NEAR(g(0), kSqrt2OverPi / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(g(1), 0.0);
  EXPECT_EQ(g(2), 0.0);
}

TEST(Gradient, DualNormBound) {
  sr::CounterRng rng(12);
  for (int i = 0; i < 30; ++i) {
    const auto m = sr::testing::random_model(rng);
    const sr::SmoothedObjective f(m);
    for (double scale : {1e-3, 0.1, 1.0, 10.0, 1e4}) {
      const sr::Vector theta = m.theta_star() + scale * m.sigma() * h_unit(m, rng);
      const sr::Vector g = f.gradient(theta);
      const double dual = g.dot(m.covariance().h.ldlt().solve(g));
      EXPECT_LE(dual, 2.0 / std::numbers::pi * (1 + 1e-12));
    }
  }
}

TEST(HessianAtOptimum, Examples) {
  const sr::SmoothedObjective f(identity_model(3, 2.0));
  EXPECT_TRUE(f.hessian_at_optimum().isApprox(0.3989422804014327 * sr::Matrix::Identity(3, 3), 1e-14));

  const double sigma = 1.3;
  const double v = sigma * std::sqrt(2.0 * std::log(2.0));
  sr::Matrix h(2, 2);
  h << 2.0, 0.5, 0.5, 1.0;
  const sr::SmoothedObjective g(sr::RegressionModel(vec({0.5, -1.0}), sr::ExplicitCovariance{h},
                                                    sigma, sr::OutlierDistribution::point_mass(0.4, v)));
  EXPECT_TRUE(g.hessian_at_optimum().isApprox(kSqrt2OverPi * 0.8 / sigma * h, 1e-13));
}

TEST(SmoothedObjective, RejectsLowQuadratureOrder) {
  EXPECT_THROW(sr::SmoothedObjective(identity_model(1, 1.0), 8), std::invalid_argument);
}

TEST(SmoothedObjectiveProperties, ConvexAlongRays) {
  sr::CounterRng rng(21);
  for (int i = 0; i < 20; ++i) {
    const auto m = sr::testing::random_model(rng);
    const sr::SmoothedObjective f(m);
    const sr::Vector theta = m.theta_star() + rng.uniform(0.1, 20.0) * h_unit(m, rng);
    const double f0 = f.expected_loss(m.theta_star());
    const double f1 = f.expected_loss(theta);
    for (int k = 0; k <= 20; ++k) {
      const double t = k / 20.0;
      const double ft = f.expected_loss(m.theta_star() + t * (theta - m.theta_star()));
      EXPECT_LE(ft, (1 - t) * f0 + t * f1 + 1e-12 * std::abs(f1));
    }
  }
}

TEST(SmoothedObjectiveProperties, RadialProfile) {
  sr::CounterRng rng(22);
  for (int i = 0; i < 20; ++i) {
    const auto m = sr::testing::random_model(rng);
    const sr::SmoothedObjective f(m);
    const double s = rng.uniform(0.01, 5.0);
    const sr::Vector a = m.theta_star() + s * h_unit(m, rng);
    const sr::Vector b = m.theta_star() + s * h_unit(m, rng);
    EXPECT_NEAR(f.expected_loss(a), f.expected_loss(b), 1e-12 * f.expected_loss(a));
    double previous = f.loss_at(0.0);
    for (double z = 1e-3; z < 1e4; z *= 1.5) {
      const double current = f.loss_at(z);
      EXPECT_GE(current, previous);
      previous = current;
    }
  }
}

TEST(SmoothedObjectiveProperties, LinearFarAwayQuadraticNearby) {
  sr::CounterRng rng(23);
  for (int i = 0; i < 20; ++i) {
    const auto m = sr::testing::random_model(rng);
    const sr::SmoothedObjective f(m);
    const double sigma = m.sigma();
    const double far = 1e6 * sigma;
    EXPECT_NEAR(f.loss_at(far) / far, kSqrt2OverPi, 1e-3 * kSqrt2OverPi);

    const double near = 1e-4 * sigma;
    const double want = (1 - f.effective_eta()) / (std::sqrt(2 * std::numbers::pi) * sigma);
    EXPECT_NEAR(f.excess_loss_at(near) / (near * near), want, 1e-3 * want);
  }
}

TEST(SmoothedObjectiveProperties, ExcessLossAgreesWithDifference) {
  sr::CounterRng rng(24);
  for (int i = 0; i < 20; ++i) {
    const sr::SmoothedObjective f(sr::testing::random_model(rng));
    for (double z : {0.3, 1.0, 3.0, 30.0}) {
      const double direct = f.loss_at(z) - f.loss_at(0.0);
      EXPECT_NEAR(f.excess_loss_at(z), direct, 1e-12 * f.loss_at(z));
    }
    EXPECT_EQ(f.excess_loss_at(0.0), 0.0);
  }
}

TEST(FoldedNormalMean, MatchesQuadrature) {
  using boost::math::quadrature::gauss_kronrod;
  for (double b : {-3.0, 0.0, 0.7, 12.0}) {
    for (double s : {0.2, 1.0, 5.0}) {
      const double oracle = gauss_kronrod<double, 61>::integrate(
          [&](double u) {
            return std::abs(u) * std::exp(-(u - b) * (u - b) / (2 * s * s)) /
                   (s * std::sqrt(2 * std::numbers::pi));
          },
          b - 40 * s, b + 40 * s, 20, 1e-15);
      EXPECT_NEAR(sr::folded_normal_mean(b, s), oracle, 1e-12 * (1 + std::abs(b)));
    }
  }
}

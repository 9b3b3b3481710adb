#pragma once

#include <cmath>
#include <initializer_list>
#include <numbers>

#include "streamrobust/model.hpp"

namespace streamrobust::testing {

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

inline RegressionModel identity_model(std::size_t d, double sigma,
                                      OutlierDistribution outliers = {}) {
  return RegressionModel(Vector::Zero(static_cast<Eigen::Index>(d)), IdentityCovariance{d},
                         sigma, std::move(outliers));
}

/// Random model: dimension 2..6, random spectrum and basis, theta*, sigma and
/// a mixture with point masses and a uniform interval.
inline RegressionModel random_model(CounterRng& rng) {
  const std::size_t d = 2 + rng.below(5);
  std::vector<double> eig(d);
  for (auto& e : eig) e = std::pow(10.0, rng.uniform(-1.0, 1.0));
  Vector theta(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.normal();
  const double sigma = std::pow(10.0, rng.uniform(-0.5, 0.5));
  const double eta = rng.uniform(0.0, 0.9);
  const double lo = rng.uniform(-20.0, 5.0);
  OutlierDistribution law(eta, {{0.4, PointMass{rng.uniform(-50.0, 50.0)}},
                                {0.35, UniformRange{lo, lo + rng.uniform(0.5, 30.0)}},
                                {0.25, PointMass{rng.uniform(-2.0, 2.0)}}});
  return RegressionModel(theta, SpectrumCovariance{eig, rng()}, sigma, std::move(law));
}

}  // namespace streamrobust::testing

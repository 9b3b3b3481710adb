#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "streamrobust/quadrature.hpp"

using streamrobust::gauss_legendre;

TEST(GaussLegendre, WeightsSumToTwoAndNodesSymmetric) {
  for (std::size_t order : {1u, 2u, 5u, 16u, 64u, 200u}) {
    const auto rule = gauss_legendre(order);
    ASSERT_EQ(rule.order(), order);
    double total = 0.0;
    for (double w : rule.weights) total += w;
    EXPECT_NEAR(total, 2.0, 1e-13) << order;
    for (std::size_t i = 0; i < order; ++i) {
      EXPECT_NEAR(rule.nodes[i], -rule.nodes[order - 1 - i], 1e-14);
    }
  }
}

TEST(GaussLegendre, ExactForPolynomialsUpToDegree2nMinus1) {
  const auto rule = gauss_legendre(8);
  for (int k = 0; k <= 15; ++k) {
    const double exact = (k % 2 == 1) ? 0.0 : 2.0 / (k + 1);
    const double got = rule.integrate([k](double x) { return std::pow(x, k); }, -1.0, 1.0);
    EXPECT_NEAR(got, exact, 1e-14) << k;
  }
}

TEST(GaussLegendre, GaussianIntegralWithPanels) {
  const auto rule = gauss_legendre(32);
  const double got =
      rule.integrate([](double x) { return std::exp(-x * x / 2.0); }, -30.0, 30.0, 8);
  EXPECT_NEAR(got, std::sqrt(2.0 * std::numbers::pi), 1e-13);
}

TEST(GaussLegendre, RejectsZeroOrder) { EXPECT_THROW(gauss_legendre(0), std::invalid_argument); }

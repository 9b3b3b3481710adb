#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "streamrobust/rng.hpp"

using streamrobust::CounterRng;
using streamrobust::derive_seed;

TEST(CounterRng, SameSeedSameSequence) {
  CounterRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a(), b());
}

TEST(CounterRng, DifferentSeedsDiffer) {
  CounterRng a(1), b(2);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) equal += a() == b();
  EXPECT_EQ(equal, 0);
}

TEST(CounterRng, SplitStreamsAreDistinctAndReproducible) {
  const CounterRng root(7);
  CounterRng s0 = root.split(0), s1 = root.split(1), again = root.split(0);
  for (int i = 0; i < 100; ++i) {
    const auto v = s0();
    EXPECT_NE(v, s1());
    EXPECT_EQ(v, again());
  }
}

TEST(CounterRng, UniformMomentsAndRange) {
  CounterRng rng(3);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sum_sq / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(11);
  const int n = 400000;
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  EXPECT_NEAR(m1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(m2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(m4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(CounterRng, BelowIsInRangeAndBalanced) {
  CounterRng rng(5);
  const std::uint64_t bound = 7;
  std::vector<int> counts(bound, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.below(bound);
    ASSERT_LT(k, bound);
    ++counts[k];
  }
  // Chi-square with 6 degrees of freedom; 22.5 is the 0.999 quantile.
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
  EXPECT_LT(chi2, 22.5);
}

TEST(DeriveSeed, DistinctPathsGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    seen.insert(derive_seed(99, {a}));
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(99, {a, b}));
  }
  EXPECT_EQ(seen.size(), 20u + 400u);
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
}

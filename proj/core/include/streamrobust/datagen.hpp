#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "streamrobust/model.hpp"

namespace streamrobust {

/// Lazy generator of i.i.d. draws from the model.
///
/// Features and dense noise come from one sub-stream of `seed`, the corruption
/// b from a disjoint one, so the corruption pattern is oblivious to (x, eps):
/// changing theta* leaves x, eps and b untouched.
class SampleGenerator {
 public:
  SampleGenerator(const RegressionModel& model, std::uint64_t seed);

  Sample next();

  /// Draws x and eps only and adds a caller-supplied corruption.
  Sample next_with_outlier(double b);

  const RegressionModel& model() const noexcept { return *model_; }

 private:
  const RegressionModel* model_;
  CounterRng feature_rng_;
  CounterRng outlier_rng_;
  Vector scratch_;
};

/// Materializes n draws. Identical to n calls of SampleGenerator::next.
std::vector<Sample> sample_stream(const RegressionModel& model, std::size_t n,
                                  std::uint64_t seed);

/// Outlier values of the three-population contamination preset.
///
/// For eta > 0.5: floor(n/4) values at 1000, floor(n/4) at sqrt(1000), and the
/// remaining floor(eta n) - 2 floor(n/4) uniform on [1, 10]. For eta <= 0.5
/// each point population holds min(floor(n/4), floor(eta n / 3)). Corrupted
/// indices are scattered uniformly at random; all other entries are 0.
std::vector<double> three_population_contamination(std::size_t n, double eta, std::uint64_t seed);

/// Outlier law whose i.i.d. draws mimic the preset at proportion eta.
OutlierDistribution three_population_distribution(double eta);

/// Builds a dataset whose corruption is fixed in advance (one entry per row).
std::vector<Sample> sample_with_outliers(const RegressionModel& model,
                                         std::span<const double> outliers,
                                         std::uint64_t seed);

/// Concatenation of `passes` independently shuffled copies of `samples`.
std::vector<Sample> multi_pass_stream(std::span<const Sample> samples,
                                      std::size_t passes, std::uint64_t seed);

/// Order in which multi_pass_stream visits the base samples.
std::vector<std::size_t> multi_pass_order(std::size_t n, std::size_t passes,
                                          std::uint64_t seed);

/// Writes `x_1,...,x_d,y,corrupted` rows.
void write_dataset_csv(std::ostream& out, std::span<const Sample> samples);

}  // namespace streamrobust

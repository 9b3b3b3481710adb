#include "streamrobust/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace streamrobust {

namespace {

constexpr std::uint64_t kFeatureStream = 0;
constexpr std::uint64_t kOutlierStream = 1;

constexpr double kLargeOutlier = 1000.0;

std::size_t corrupted_budget(std::size_t n, double eta) {
  // The epsilon absorbs representation error in products like 0.7 * 10.
  return static_cast<std::size_t>(std::floor(eta * static_cast<double>(n) + 1e-9));
}

void fisher_yates(std::span<std::size_t> items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

SampleGenerator::SampleGenerator(const RegressionModel& model, std::uint64_t seed)
    : model_(&model),
      feature_rng_(CounterRng(seed).split(kFeatureStream)),
      outlier_rng_(CounterRng(seed).split(kOutlierStream)),
      scratch_(static_cast<Eigen::Index>(model.dimension())) {}

Sample SampleGenerator::next() {
  const double b = model_->outliers().sample(outlier_rng_);
  return next_with_outlier(b);
}

Sample SampleGenerator::next_with_outlier(double b) {
  for (Eigen::Index i = 0; i < scratch_.size(); ++i) scratch_(i) = feature_rng_.normal();
  Sample s;
  s.x = model_->covariance().chol.triangularView<Eigen::Lower>() * scratch_;
  const double eps = model_->sigma() * feature_rng_.normal();
  s.y = s.x.dot(model_->theta_star()) + eps + b;
  s.corrupted = b != 0.0;
  return s;
}

std::vector<Sample> sample_stream(const RegressionModel& model, std::size_t n,
                                  std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_stream: n must be >= 1");
  SampleGenerator gen(model, seed);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(gen.next());
  return out;
}

std::vector<double> three_population_contamination(std::size_t n, double eta, std::uint64_t seed) {
  if (n < 4) throw std::invalid_argument("three_population_contamination: n must be >= 4");
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw std::invalid_argument("three_population_contamination: eta must lie in [0, 1)");
  }
  const std::size_t budget = corrupted_budget(n, eta);
  const std::size_t quarter = n / 4;
  std::size_t per_point_mass = quarter;
  if (eta <= 0.5) {
    per_point_mass = std::min(quarter, budget / 3);
  }
  const std::size_t n_uniform = budget - 2 * per_point_mass;

  CounterRng rng(seed);
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `budget` slots form a uniform subset.
  for (std::size_t i = 0; i < budget; ++i) {
    const std::size_t j = i + rng.below(n - i);
    std::swap(index[i], index[j]);
  }

  std::vector<double> b(n, 0.0);
  const double mid = std::sqrt(kLargeOutlier);
  std::size_t k = 0;
  for (std::size_t i = 0; i < per_point_mass; ++i) b[index[k++]] = kLargeOutlier;
  for (std::size_t i = 0; i < per_point_mass; ++i) b[index[k++]] = mid;
  for (std::size_t i = 0; i < n_uniform; ++i) b[index[k++]] = rng.uniform(1.0, 10.0);
  return b;
}

OutlierDistribution three_population_distribution(double eta) {
  if (eta == 0.0) return {};
  double w_point = 0.25 / eta;
  if (eta <= 0.5) w_point = 1.0 / 3.0;
  const double w_uniform = 1.0 - 2.0 * w_point;
  std::vector<OutlierComponent> comps{{w_point, PointMass{kLargeOutlier}},
                                      {w_point, PointMass{std::sqrt(kLargeOutlier)}}};
  if (w_uniform > 0.0) comps.push_back({w_uniform, UniformRange{1.0, 10.0}});
  else comps[1].weight = 1.0 - comps[0].weight;
  return {eta, std::move(comps)};
}

std::vector<Sample> sample_with_outliers(const RegressionModel& model,
                                         std::span<const double> outliers,
                                         std::uint64_t seed) {
  SampleGenerator gen(model, seed);
  std::vector<Sample> out;
  out.reserve(outliers.size());
  for (double b : outliers) out.push_back(gen.next_with_outlier(b));
  return out;
}

std::vector<std::size_t> multi_pass_order(std::size_t n, std::size_t passes,
                                          std::uint64_t seed) {
  if (passes == 0) throw std::invalid_argument("multi_pass_stream: passes must be >= 1");
  std::vector<std::size_t> order;
  order.reserve(n * passes);
  std::vector<std::size_t> perm(n);
  const CounterRng root(seed);
  for (std::size_t p = 0; p < passes; ++p) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng = root.split(p);
    fisher_yates(perm, rng);
    order.insert(order.end(), perm.begin(), perm.end());
  }
  return order;
}

std::vector<Sample> multi_pass_stream(std::span<const Sample> samples,
                                      std::size_t passes, std::uint64_t seed) {
  const auto order = multi_pass_order(samples.size(), passes, seed);
  std::vector<Sample> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(samples[i]);
  return out;
}

void write_dataset_csv(std::ostream& out, std::span<const Sample> samples) {
  const Eigen::Index d = samples.empty() ? 0 : samples.front().x.size();
  for (Eigen::Index j = 0; j < d; ++j) out << "x_" << (j + 1) << ',';
  out << "y,corrupted\n";
  for (const auto& s : samples) {
    for (Eigen::Index j = 0; j < d; ++j) out << format_double(s.x(j)) << ',';
    out << format_double(s.y) << ',' << (s.corrupted ? 1 : 0) << '\n';
  }
}

}  // namespace streamrobust

#include <benchmark/benchmark.h>

#include "streamrobust/analytic.hpp"
#include "streamrobust/datagen.hpp"
#include "streamrobust/optimizer.hpp"

namespace sr = streamrobust;

namespace {

sr::RegressionModel bench_model(std::size_t d) {
  sr::Vector theta = sr::Vector::Ones(static_cast<Eigen::Index>(d)) / std::sqrt(double(d));
  return sr::RegressionModel(theta, sr::inverse_k_spectrum(d, 1), 1.0,
                             sr::OutlierDistribution::point_mass(0.2, 1000.0));
}

void BM_SgdStep(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto model = bench_model(d);
  const auto stream = sr::sample_stream(model, 4096, 7);
  const auto schedule = sr::StepSchedule::inv_sqrt(sr::default_gamma0(model.covariance()));
  auto s = sr::SgdState::start(sr::Vector::Zero(static_cast<Eigen::Index>(d)), sr::L1Loss{});
  std::size_t i = 0;
  for (auto _ : state) {
    sr::sgd_step(s, stream[i++ & 4095], schedule);
    benchmark::DoNotOptimize(s.theta.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SgdStep)->Arg(10)->Arg(100);

void BM_SampleGeneration(benchmark::State& state) {
  const auto model = bench_model(static_cast<std::size_t>(state.range(0)));
  sr::SampleGenerator gen(model, 3);
  for (auto _ : state) benchmark::DoNotOptimize(gen.next());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SampleGeneration)->Arg(10);

void BM_ExpectedLoss(benchmark::State& state) {
  const auto model = bench_model(10).with_outliers(sr::OutlierDistribution(
      0.3, {{0.5, sr::PointMass{50.0}}, {0.5, sr::UniformRange{-5.0, 20.0}}}));
  const sr::SmoothedObjective f(model, static_cast<std::size_t>(state.range(0)));
  const sr::Vector theta = model.theta_star() * 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(f.expected_loss(theta));
}
BENCHMARK(BM_ExpectedLoss)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();

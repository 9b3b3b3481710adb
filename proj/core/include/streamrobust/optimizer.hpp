#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamrobust/model.hpp"

namespace streamrobust {

/// One step of averaged SGD. With r = y - <x, theta> and gamma = gamma(n + 1):
///   l1:    theta += gamma * sgn(r) * x          (sgn(0) = 0)
///   l2:    theta += gamma * r * x
///   huber: l2 step if |r| <= tau, else gamma * tau * sgn(r) * x
/// then theta_bar <- theta_old / (n + 1) + n / (n + 1) * theta_bar and n += 1.
void sgd_step(SgdState& state, const Sample& sample, const StepSchedule& schedule);

/// Residual-driven scalar multiplying x in the update, before the step size.
double update_weight(const LossKind& loss, double residual);

/// Source of samples for a run. Returns nullptr when exhausted.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual const Sample* next() = 0;
};

/// Reads a materialized stream in order, optionally through an index order.
class SpanSource final : public SampleSource {
 public:
  explicit SpanSource(std::span<const Sample> samples) : samples_(samples) {}
  SpanSource(std::span<const Sample> samples, std::span<const std::size_t> order)
      : samples_(samples), order_(order), use_order_(true) {}
  const Sample* next() override;

 private:
  std::span<const Sample> samples_;
  std::span<const std::size_t> order_;
  bool use_order_ = false;
  std::size_t pos_ = 0;
};

class SampleGenerator;

/// Fresh draws from a generator; never exhausted.
class GeneratorSource final : public SampleSource {
 public:
  explicit GeneratorSource(SampleGenerator& generator) : generator_(&generator) {}
  const Sample* next() override;

 private:
  SampleGenerator* generator_;
  Sample current_;
};

/// Ground truth used only to score checkpoints.
struct ErrorMetric {
  Vector theta_star;
  Matrix h;

  static ErrorMetric of(const RegressionModel& model) {
    return {model.theta_star(), model.covariance().h};
  }
  Checkpoint score(std::uint64_t n, const SgdState& state) const;
};

struct RunConfig {
  LossKind loss = L1Loss{};
  StepSchedule schedule = StepSchedule::inv_sqrt(1.0);
  std::uint64_t n_steps = 0;
  std::vector<std::uint64_t> checkpoints;
  Vector theta0;
  std::uint64_t seed = 0;
  std::string config_digest;
};

/// Optional side outputs of a run, for debugging and invariant checks.
struct RunTrace {
  bool record_iterates = false;
  std::vector<Vector> iterates;  // theta_0 .. theta_n when record_iterates
  std::optional<SgdState> final_state;
};

/// Consumes n_steps samples, checkpointing at the configured iterations.
/// Throws std::runtime_error if the source runs dry first.
RunRecord run(SampleSource& source, const RunConfig& config, const ErrorMetric& metric,
              RunTrace* trace = nullptr);

/// Constant-step averaged least squares over the clean samples only.
/// Checkpoints index stream positions; corrupted positions are skipped, so
/// after consuming k samples the state has taken (number of clean samples) steps.
RunRecord oracle_ls_run(SampleSource& source, double gamma0, std::uint64_t n_steps,
                        const std::vector<std::uint64_t>& checkpoints,
                        const Vector& theta0, const ErrorMetric& metric,
                        std::uint64_t seed = 0, std::string config_digest = {},
                        RunTrace* trace = nullptr);

/// Geometric grid {ceil(ratio^k)} within [1, n_steps], deduplicated, with
/// n_steps appended so the final iterate is always scored.
std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_steps,
                                                 double ratio = 1.25);

/// gamma0 = 1 / trace(H), the default for every loss.
double default_gamma0(const Covariance& covariance);

void write_run_record(std::ostream& out, const RunRecord& record);
RunRecord read_run_record(std::istream& in);

}  // namespace streamrobust

#pragma once

// Experiment harness: convergence curves, breakdown sweeps, Huber tuning and
// rate-slope fits on synthetic contaminated streams.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamrobust/model.hpp"

namespace streamrobust {

enum class ContaminationPreset { None, ThreePopulation, PointMass, Uniform };
enum class CovarianceChoice { Identity, InverseK };
enum class EstimatorKind { L1, L2, Huber, Oracle };
enum class Gamma0Rule { InverseTrace, InverseSqrtTrace };

std::string_view preset_name(ContaminationPreset preset);
std::string_view covariance_name(CovarianceChoice choice);
std::string_view estimator_name(EstimatorKind kind);

struct Contamination {
  ContaminationPreset preset = ContaminationPreset::ThreePopulation;
  double eta = 0.2;
  double value = 1000.0;  // PointMass
  double lo = 1.0;        // Uniform
  double hi = 10.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t replications = 5;
  /// 0 means streaming: fresh i.i.d. draws, `samples` steps in total.
  std::size_t passes = 5;

  std::size_t dimension = 10;
  std::size_t samples = 100000;
  double sigma = 1.0;
  double theta_norm = 1.0;
  std::vector<CovarianceChoice> covariances{CovarianceChoice::Identity,
                                            CovarianceChoice::InverseK};

  Contamination contamination;

  std::optional<double> gamma0;
  Gamma0Rule gamma0_rule = Gamma0Rule::InverseTrace;
  double checkpoint_ratio = 1.25;
  std::vector<EstimatorKind> estimators{EstimatorKind::L1, EstimatorKind::L2,
                                        EstimatorKind::Huber, EstimatorKind::Oracle};

  /// Fixed Huber threshold; when unset it is tuned over tau_grid.
  std::optional<double> huber_tau;
  std::vector<double> tau_grid{1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  std::vector<double> huber_multipliers{1.0};

  std::vector<double> eta_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<double> breakdown_multipliers{1.0, 30.0};

  std::size_t quadrature_order = 64;

  /// Every problem with the configuration, not just the first.
  std::vector<std::string> validate() const;
  /// Canonical `key=value` text of every field; input to digest().
  std::string canonical_text() const;
  std::string digest() const;

  std::size_t steps() const { return passes == 0 ? samples : samples * passes; }
  bool streaming() const { return passes == 0; }
};

/// One estimator of a sweep. `multiplier` scales tau_opt for Huber.
struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::L1;
  double multiplier = 1.0;

  std::string label() const;
};

/// Seed actually used for one replication of one sweep cell.
struct CellSeed {
  std::string cell;
  std::uint64_t seed = 0;
};

/// Per-checkpoint means over replications.
struct ConvergenceTable {
  std::string estimator;
  std::string covariance;
  std::vector<std::uint64_t> n;
  std::vector<double> mean_err_h;
  std::vector<double> mean_err_2;
  std::vector<double> mean_err_last_h;
  std::vector<RunRecord> runs;
};

/// Pure reduction of stored records (all on the same checkpoint grid).
ConvergenceTable aggregate(std::string estimator, std::string covariance,
                           std::vector<RunRecord> runs);

struct ConvergenceResult {
  std::vector<ConvergenceTable> tables;
  /// tau_opt per covariance, in config order (empty when Huber is not run).
  std::vector<double> tau_opt;
  std::vector<CellSeed> seeds;
};

ConvergenceResult convergence_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

struct TauTuning {
  double tau = 0.0;
  std::vector<double> mean_final_err;  // one per grid point
};

/// Grid search on mean final err_H over replications; ties go to the smaller tau.
TauTuning tune_huber_tau(const ExperimentConfig& config, std::span<const double> tau_grid,
                         CovarianceChoice covariance, std::size_t jobs = 1);

/// Argmin over grid with ties to the smaller tau. Grid and errors align.
double select_tau(std::span<const double> tau_grid, std::span<const double> errors);

struct BreakdownRow {
  double eta = 0.0;
  double tau_opt = 0.0;
  std::vector<double> final_err_h;  // aligned with BreakdownResult::estimators
};

struct BreakdownResult {
  std::vector<std::string> estimators;
  std::vector<BreakdownRow> rows;
  std::vector<CellSeed> seeds;
};

/// Sweeps eta over config.eta_grid on the first configured covariance with
/// l1, l2, Huber(m * tau_opt) for each breakdown multiplier m, and the oracle.
BreakdownResult breakdown_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

/// OLS of log(err) on log(n) over checkpoints with log n in the trailing
/// `window` fraction of [log n_first, log n_last]. Needs >= 5 points.
SlopeFit fit_rate_slope(std::span<const std::uint64_t> n, std::span<const double> err,
                        double window = 0.5);
SlopeFit fit_rate_slope(const RunRecord& record, double window = 0.5);

/// Number of adjacent decreases in a sequence.
std::size_t count_inversions(std::span<const double> values);

void write_convergence_table(std::ostream& out, const ConvergenceTable& table,
                             const ExperimentConfig& config);
void write_breakdown_table(std::ostream& out, const BreakdownResult& result,
                           const ExperimentConfig& config);

/// Builds the model of one replication (theta* direction and covariance
/// basis derived from the master seed).
RegressionModel replication_model(const ExperimentConfig& config, CovarianceChoice covariance,
                                  double eta, std::size_t replication);

double resolve_gamma0(const ExperimentConfig& config, const Covariance& covariance);

std::string_view tool_version();

}  // namespace streamrobust

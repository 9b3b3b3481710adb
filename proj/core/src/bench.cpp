#include "streamrobust/bench.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "streamrobust/datagen.hpp"
#include "streamrobust/optimizer.hpp"
#include "streamrobust/parallel.hpp"

namespace streamrobust {

namespace {

// Seed-derivation paths below the master seed.
constexpr std::uint64_t kThetaStream = 1;
constexpr std::uint64_t kBasisStream = 2;
constexpr std::uint64_t kDataStream = 3;
constexpr std::uint64_t kOutlierStream = 4;
constexpr std::uint64_t kOrderStream = 5;

bool finite(double v) { return std::isfinite(v); }

std::string join(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

/// A materialized replication: model plus either a stored dataset with its
/// pass order or the seed of a fresh stream.
struct Cell {
  RegressionModel model;
  std::uint64_t data_seed = 0;
  std::vector<Sample> samples;
  std::vector<std::size_t> order;
};

Cell make_cell(const ExperimentConfig& config, CovarianceChoice covariance, double eta,
               std::size_t r) {
  Cell cell{replication_model(config, covariance, eta, r),
            derive_seed(config.seed, {kDataStream, r}),
            {},
            {}};
  if (config.streaming()) return cell;
  if (config.contamination.preset == ContaminationPreset::ThreePopulation && eta > 0.0) {
    const auto b =
        three_population_contamination(config.samples, eta, derive_seed(config.seed, {kOutlierStream, r}));
    cell.samples = sample_with_outliers(cell.model, b, cell.data_seed);
  } else {
    cell.samples = sample_stream(cell.model, config.samples, cell.data_seed);
  }
  cell.order =
      multi_pass_order(config.samples, config.passes, derive_seed(config.seed, {kOrderStream, r}));
  return cell;
}

RunRecord run_estimator(const ExperimentConfig& config, const Cell& cell,
                        EstimatorKind kind, double tau,
                        const std::vector<std::uint64_t>& checkpoints,
                        const std::string& digest) {
  const double gamma0 = resolve_gamma0(config, cell.model.covariance());
  const ErrorMetric metric = ErrorMetric::of(cell.model);
  const Vector theta0 = Vector::Zero(static_cast<Eigen::Index>(config.dimension));

  std::unique_ptr<SampleGenerator> generator;
  std::unique_ptr<SampleSource> source;
  if (config.streaming()) {
    generator = std::make_unique<SampleGenerator>(cell.model, cell.data_seed);
    source = std::make_unique<GeneratorSource>(*generator);
  } else {
    source = std::make_unique<SpanSource>(cell.samples, cell.order);
  }

  if (kind == EstimatorKind::Oracle) {
    return oracle_ls_run(*source, gamma0, config.steps(), checkpoints, theta0, metric,
                         cell.data_seed, digest);
  }
  RunConfig rc;
  switch (kind) {
    case EstimatorKind::L1: rc.loss = L1Loss{}; break;
    case EstimatorKind::L2: rc.loss = L2Loss{}; break;
    default: rc.loss = huber(tau); break;
  }
  rc.schedule = StepSchedule::inv_sqrt(gamma0);
  rc.n_steps = config.steps();
  rc.checkpoints = checkpoints;
  rc.theta0 = theta0;
  rc.seed = cell.data_seed;
  rc.config_digest = digest;
  return run(*source, rc, metric);
}

std::vector<Cell> make_cells(const ExperimentConfig& config, CovarianceChoice covariance,
                             double eta, std::size_t jobs) {
  std::vector<std::optional<Cell>> slots(config.replications);
  parallel_for(config.replications, jobs,
               [&](std::size_t r) { slots[r] = make_cell(config, covariance, eta, r); });
  std::vector<Cell> cells;
  cells.reserve(slots.size());
  for (auto& s : slots) cells.push_back(std::move(*s));
  return cells;
}

TauTuning tune_on_cells(const ExperimentConfig& config, const std::vector<Cell>& cells,
                        std::span<const double> tau_grid, const std::string& digest,
                        std::size_t jobs) {
  if (tau_grid.empty()) throw std::invalid_argument("tune_huber_tau: empty tau grid");
  const std::size_t g = tau_grid.size();
  const std::vector<std::uint64_t> final_only{config.steps()};
  std::vector<double> finals(cells.size() * g);
  parallel_for(cells.size() * g, jobs, [&](std::size_t task) {
    const std::size_t r = task / g;
    const std::size_t i = task % g;
    finals[task] = run_estimator(config, cells[r], EstimatorKind::Huber, tau_grid[i],
                                 final_only, digest)
                       .final()
                       .err_h;
  });
  TauTuning out;
  out.mean_final_err.assign(g, 0.0);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < g; ++i) out.mean_final_err[i] += finals[r * g + i];
  }
  for (auto& e : out.mean_final_err) e /= static_cast<double>(cells.size());
  out.tau = select_tau(tau_grid, out.mean_final_err);
  return out;
}

double resolve_tau(const ExperimentConfig& config, const std::vector<Cell>& cells,
                   const std::string& digest, std::size_t jobs) {
  if (config.huber_tau) return *config.huber_tau;
  return tune_on_cells(config, cells, config.tau_grid, digest, jobs).tau;
}

std::string cell_label(CovarianceChoice covariance, double eta, std::size_t r) {
  return std::string(covariance_name(covariance)) + "/eta=" + format_double(eta) +
         "/rep=" + std::to_string(r);
}

void throw_if_invalid(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::string msg = "invalid experiment configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw std::invalid_argument(msg);
}

}  // namespace

std::string_view preset_name(ContaminationPreset preset) {
  switch (preset) {
    case ContaminationPreset::None: return "none";
    case ContaminationPreset::ThreePopulation: return "three_population";
    case ContaminationPreset::PointMass: return "point_mass";
    case ContaminationPreset::Uniform: return "uniform";
  }
  return "none";
}

std::string_view covariance_name(CovarianceChoice choice) {
  return choice == CovarianceChoice::Identity ? "identity" : "inverse_k";
}

std::string_view estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::L1: return "l1";
    case EstimatorKind::L2: return "l2";
    case EstimatorKind::Huber: return "huber";
    case EstimatorKind::Oracle: return "oracle";
  }
  return "l1";
}

std::string EstimatorSpec::label() const {
  if (kind != EstimatorKind::Huber) return std::string(estimator_name(kind));
  return "huber_x" + format_double(multiplier);
}

std::string_view tool_version() {
#ifdef STREAMROBUST_VERSION
  return STREAMROBUST_VERSION;
#else
  return "unknown";
#endif
}

// ---------------------------------------------------------------------------

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> errors;
  auto need = [&errors](bool ok, std::string message) {
    if (!ok) errors.push_back(std::move(message));
  };
  need(replications >= 1, "experiment.replications must be >= 1");
  need(dimension >= 1, "model.dimension must be >= 1");
  need(samples >= 4, "model.samples must be >= 4");
  need(finite(sigma) && sigma > 0.0, "model.sigma must be finite and > 0");
  need(finite(theta_norm) && theta_norm >= 0.0, "model.theta_norm must be finite and >= 0");
  need(!covariances.empty(), "model.covariances must name at least one covariance");
  need(std::set<CovarianceChoice>(covariances.begin(), covariances.end()).size() ==
           covariances.size(),
       "model.covariances has duplicates");

  const auto& c = contamination;
  need(finite(c.eta) && c.eta >= 0.0 && c.eta < 1.0, "outliers.eta must lie in [0, 1)");
  if (c.preset == ContaminationPreset::None) {
    need(c.eta == 0.0, "outliers.eta must be 0 when outliers.preset = none");
  }
  if (c.preset == ContaminationPreset::PointMass) {
    need(finite(c.value) && c.value != 0.0, "outliers.value must be finite and nonzero");
  }
  if (c.preset == ContaminationPreset::Uniform) {
    need(finite(c.lo) && finite(c.hi) && c.lo < c.hi, "outliers.lo must be < outliers.hi");
  }

  if (gamma0) need(finite(*gamma0) && *gamma0 > 0.0, "optimizer.gamma0 must be > 0");
  need(finite(checkpoint_ratio) && checkpoint_ratio > 1.0,
       "optimizer.checkpoint_ratio must be > 1");
  need(!estimators.empty(), "optimizer.losses must name at least one estimator");
  need(std::set<EstimatorKind>(estimators.begin(), estimators.end()).size() ==
           estimators.size(),
       "optimizer.losses has duplicates");

  auto positive = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return finite(x) && x > 0.0; });
  };
  if (huber_tau) need(finite(*huber_tau) && *huber_tau > 0.0, "huber.tau must be > 0");
  need(!tau_grid.empty() && positive(tau_grid), "huber.tau_grid must be nonempty and positive");
  need(std::is_sorted(tau_grid.begin(), tau_grid.end()) &&
           std::adjacent_find(tau_grid.begin(), tau_grid.end()) == tau_grid.end(),
       "huber.tau_grid must be strictly increasing");
  need(!huber_multipliers.empty() && positive(huber_multipliers),
       "huber.multipliers must be nonempty and positive");
  need(positive(breakdown_multipliers), "breakdown.huber_multipliers must be positive");
  need(std::all_of(eta_grid.begin(), eta_grid.end(),
                   [](double e) { return finite(e) && e > 0.0 && e < 1.0; }),
       "breakdown.eta_grid values must lie in (0, 1)");
  need(quadrature_order >= 16, "analytic.quadrature_order must be >= 16");
  return errors;
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "experiment.seed=" << seed << '\n'
      << "experiment.replications=" << replications << '\n'
      << "experiment.passes=" << passes << '\n'
      << "model.dimension=" << dimension << '\n'
      << "model.samples=" << samples << '\n'
      << "model.sigma=" << format_double(sigma) << '\n'
      << "model.theta_norm=" << format_double(theta_norm) << '\n'
      << "model.covariances=";
  for (std::size_t i = 0; i < covariances.size(); ++i) {
    out << (i ? " " : "") << covariance_name(covariances[i]);
  }
  out << '\n'
      << "outliers.preset=" << preset_name(contamination.preset) << '\n'
      << "outliers.eta=" << format_double(contamination.eta) << '\n'
      << "outliers.value=" << format_double(contamination.value) << '\n'
      << "outliers.lo=" << format_double(contamination.lo) << '\n'
      << "outliers.hi=" << format_double(contamination.hi) << '\n'
      << "optimizer.gamma0=" << (gamma0 ? format_double(*gamma0) : "auto") << '\n'
      << "optimizer.gamma0_scale="
      << (gamma0_rule == Gamma0Rule::InverseTrace ? "trace" : "sqrt_trace") << '\n'
      << "optimizer.checkpoint_ratio=" << format_double(checkpoint_ratio) << '\n'
      << "optimizer.losses=";
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    out << (i ? " " : "") << estimator_name(estimators[i]);
  }
  out << '\n'
      << "huber.tau=" << (huber_tau ? format_double(*huber_tau) : "tuned") << '\n'
      << "huber.tau_grid=" << join(tau_grid) << '\n'
      << "huber.multipliers=" << join(huber_multipliers) << '\n'
      << "breakdown.eta_grid=" << join(eta_grid) << '\n'
      << "breakdown.huber_multipliers=" << join(breakdown_multipliers) << '\n'
      << "analytic.quadrature_order=" << quadrature_order << '\n';
  return out.str();
}

std::string ExperimentConfig::digest() const { return digest_hex(canonical_text()); }

// ---------------------------------------------------------------------------

RegressionModel replication_model(const ExperimentConfig& config, CovarianceChoice covariance,
                                  double eta, std::size_t replication) {
  const auto d = static_cast<Eigen::Index>(config.dimension);
  CounterRng rng(derive_seed(config.seed, {kThetaStream, replication}));
  Vector theta_star(d);
  for (Eigen::Index i = 0; i < d; ++i) theta_star(i) = rng.normal();
  theta_star *= config.theta_norm / theta_star.norm();

  CovarianceSpec spec = IdentityCovariance{config.dimension};
  if (covariance == CovarianceChoice::InverseK) {
    spec = inverse_k_spectrum(config.dimension, derive_seed(config.seed, {kBasisStream}));
  }

  OutlierDistribution law;
  const auto& c = config.contamination;
  if (eta > 0.0) {
    switch (c.preset) {
      case ContaminationPreset::None: break;
      case ContaminationPreset::ThreePopulation: law = three_population_distribution(eta); break;
      case ContaminationPreset::PointMass: law = OutlierDistribution::point_mass(eta, c.value); break;
      case ContaminationPreset::Uniform: law = OutlierDistribution::uniform(eta, c.lo, c.hi); break;
    }
  }
  return RegressionModel(std::move(theta_star), std::move(spec), config.sigma, std::move(law));
}

double resolve_gamma0(const ExperimentConfig& config, const Covariance& covariance) {
  if (config.gamma0) return *config.gamma0;
  if (config.gamma0_rule == Gamma0Rule::InverseSqrtTrace) return 1.0 / std::sqrt(covariance.r2);
  return default_gamma0(covariance);
}

ConvergenceTable aggregate(std::string estimator, std::string covariance,
                           std::vector<RunRecord> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  ConvergenceTable table;
  table.estimator = std::move(estimator);
  table.covariance = std::move(covariance);
  const std::size_t k = runs.front().checkpoints.size();
  for (const auto& r : runs) {
    if (r.checkpoints.size() != k) throw std::invalid_argument("aggregate: checkpoint grids differ");
  }
  const double count = static_cast<double>(runs.size());
  for (std::size_t c = 0; c < k; ++c) {
    const std::uint64_t n = runs.front().checkpoints[c].n;
    double h = 0.0, e2 = 0.0, last = 0.0;
    for (const auto& r : runs) {
      const auto& cp = r.checkpoints[c];
      if (cp.n != n) throw std::invalid_argument("aggregate: checkpoint grids differ");
      h += cp.err_h;
      e2 += cp.err_2;
      last += cp.err_last_h;
    }
    table.n.push_back(n);
    table.mean_err_h.push_back(h / count);
    table.mean_err_2.push_back(e2 / count);
    table.mean_err_last_h.push_back(last / count);
  }
  table.runs = std::move(runs);
  return table;
}

double select_tau(std::span<const double> tau_grid, std::span<const double> errors) {
  if (tau_grid.empty() || tau_grid.size() != errors.size()) {
    throw std::invalid_argument("select_tau: grid and errors must be nonempty and aligned");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < tau_grid.size(); ++i) {
    const bool better = errors[i] < errors[best] ||
                        (errors[i] == errors[best] && tau_grid[i] < tau_grid[best]);
    if (better) best = i;
  }
  return tau_grid[best];
}

TauTuning tune_huber_tau(const ExperimentConfig& config, std::span<const double> tau_grid,
                         CovarianceChoice covariance, std::size_t jobs) {
  throw_if_invalid(config.validate());
  const auto cells = make_cells(config, covariance, config.contamination.eta, jobs);
  return tune_on_cells(config, cells, tau_grid, config.digest(), jobs);
}

ConvergenceResult convergence_experiment(const ExperimentConfig& config, std::size_t jobs) {
  throw_if_invalid(config.validate());
  const std::string digest = config.digest();
  const auto checkpoints = geometric_checkpoints(config.steps(), config.checkpoint_ratio);
  const double eta = config.contamination.eta;

  std::vector<EstimatorSpec> specs;
  for (auto kind : config.estimators) {
    if (kind == EstimatorKind::Huber) {
      for (double m : config.huber_multipliers) specs.push_back({kind, m});
    } else {
      specs.push_back({kind, 1.0});
    }
  }
  const bool has_huber = std::find(config.estimators.begin(), config.estimators.end(),
                                   EstimatorKind::Huber) != config.estimators.end();

  ConvergenceResult result;
  for (auto covariance : config.covariances) {
    const auto cells = make_cells(config, covariance, eta, jobs);
    for (std::size_t r = 0; r < cells.size(); ++r) {
      result.seeds.push_back({cell_label(covariance, eta, r), cells[r].data_seed});
    }
    const double tau = has_huber ? resolve_tau(config, cells, digest, jobs) : 0.0;
    if (has_huber) result.tau_opt.push_back(tau);

    const std::size_t reps = cells.size();
    std::vector<RunRecord> records(specs.size() * reps);
    parallel_for(records.size(), jobs, [&](std::size_t task) {
      const auto& spec = specs[task / reps];
      records[task] = run_estimator(config, cells[task % reps], spec.kind,
                                    tau * spec.multiplier, checkpoints, digest);
    });
    for (std::size_t s = 0; s < specs.size(); ++s) {
      std::vector<RunRecord> runs(std::make_move_iterator(records.begin() + s * reps),
                                  std::make_move_iterator(records.begin() + (s + 1) * reps));
      result.tables.push_back(
          aggregate(specs[s].label(), std::string(covariance_name(covariance)), std::move(runs)));
    }
  }
  return result;
}

BreakdownResult breakdown_experiment(const ExperimentConfig& config, std::size_t jobs) {
  auto errors = config.validate();
  if (config.eta_grid.empty()) errors.push_back("breakdown.eta_grid must not be empty");
  if (config.contamination.preset == ContaminationPreset::None) {
    errors.push_back("outliers.preset must not be none for a breakdown sweep");
  }
  throw_if_invalid(errors);

  const std::string digest = config.digest();
  const CovarianceChoice covariance = config.covariances.front();
  const std::vector<std::uint64_t> final_only{config.steps()};

  std::vector<EstimatorSpec> specs{{EstimatorKind::L1, 1.0}, {EstimatorKind::L2, 1.0}};
  for (double m : config.breakdown_multipliers) specs.push_back({EstimatorKind::Huber, m});
  specs.push_back({EstimatorKind::Oracle, 1.0});

  BreakdownResult result;
  for (const auto& s : specs) result.estimators.push_back(s.label());

  for (double eta : config.eta_grid) {
    const auto cells = make_cells(config, covariance, eta, jobs);
    for (std::size_t r = 0; r < cells.size(); ++r) {
      result.seeds.push_back({cell_label(covariance, eta, r), cells[r].data_seed});
    }
    BreakdownRow row;
    row.eta = eta;
    row.tau_opt = resolve_tau(config, cells, digest, jobs);

    const std::size_t reps = cells.size();
    std::vector<double> finals(specs.size() * reps);
    parallel_for(finals.size(), jobs, [&](std::size_t task) {
      const auto& spec = specs[task / reps];
      finals[task] = run_estimator(config, cells[task % reps], spec.kind,
                                   row.tau_opt * spec.multiplier, final_only, digest)
                         .final()
                         .err_h;
    });
    for (std::size_t s = 0; s < specs.size(); ++s) {
      double sum = 0.0;
      for (std::size_t r = 0; r < reps; ++r) sum += finals[s * reps + r];
      row.final_err_h.push_back(sum / static_cast<double>(reps));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

// ---------------------------------------------------------------------------

SlopeFit fit_rate_slope(std::span<const std::uint64_t> n, std::span<const double> err,
                        double window) {
  if (n.size() != err.size()) throw std::invalid_argument("fit_rate_slope: size mismatch");
  if (!(window > 0.0 && window <= 1.0)) {
    throw std::invalid_argument("fit_rate_slope: window must lie in (0, 1]");
  }
  if (n.empty()) throw std::invalid_argument("fit_rate_slope: no checkpoints");
  const double first = std::log(static_cast<double>(n.front()));
  const double last = std::log(static_cast<double>(n.back()));
  const double cut = last - window * (last - first);

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(static_cast<double>(n[i]));
    if (x < cut) continue;
    if (!(err[i] > 0.0)) {
      throw std::invalid_argument("fit_rate_slope: errors must be > 0 inside the window");
    }
    xs.push_back(x);
    ys.push_back(std::log(err[i]));
  }
  if (xs.size() < 5) {
    throw std::invalid_argument("fit_rate_slope: need >= 5 checkpoints in the window, got " +
                                std::to_string(xs.size()));
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_rate_slope: zero variance in log n");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

SlopeFit fit_rate_slope(const RunRecord& record, double window) {
  std::vector<std::uint64_t> n;
  std::vector<double> err;
  for (const auto& c : record.checkpoints) {
    n.push_back(c.n);
    err.push_back(c.err_h);
  }
  return fit_rate_slope(n, err, window);
}

std::size_t count_inversions(std::span<const double> values) {
  std::size_t count = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1]) ++count;
  }
  return count;
}

void write_convergence_table(std::ostream& out, const ConvergenceTable& table,
                             const ExperimentConfig& config) {
  out << "# estimator=" << table.estimator << '\n'
      << "# covariance=" << table.covariance << '\n'
      << "# config_digest=" << config.digest() << '\n'
      << "# master_seed=" << config.seed << '\n'
      << "# replications=" << table.runs.size() << '\n'
      << "n,mean_err_H,mean_err_2,mean_err_last_H\n";
  for (std::size_t i = 0; i < table.n.size(); ++i) {
    out << table.n[i] << ',' << format_double(table.mean_err_h[i]) << ','
        << format_double(table.mean_err_2[i]) << ',' << format_double(table.mean_err_last_h[i])
        << '\n';
  }
}

void write_breakdown_table(std::ostream& out, const BreakdownResult& result,
                           const ExperimentConfig& config) {
  out << "# config_digest=" << config.digest() << '\n'
      << "# master_seed=" << config.seed << '\n'
      << "# value=mean final err_H over " << config.replications << " replications\n"
      << "eta";
  for (const auto& e : result.estimators) out << ',' << e;
  out << '\n';
  for (const auto& row : result.rows) {
    out << format_double(row.eta);
    for (double v : row.final_err_h) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace streamrobust

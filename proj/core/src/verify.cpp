#include "streamrobust/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "streamrobust/datagen.hpp"
#include "streamrobust/optimizer.hpp"
#include "streamrobust/parallel.hpp"

namespace streamrobust {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628695;  // 1/sqrt(pi)
constexpr double kSqrt2OverPi = 0.79788456080286535588;
// (sqrt(2) - 1) / sqrt(pi)
const double kErfConstant = (std::numbers::sqrt2 - 1.0) * kInvSqrtPi;

std::vector<double> logspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = std::pow(10.0, a + t * (b - a));
  }
  return out;
}

// Solves H v = w through the model's Cholesky factor and returns w^T H^{-1} w.
double inverse_h_norm_sq(const Covariance& cov, const Vector& w) {
  const Vector y = cov.chol.triangularView<Eigen::Lower>().solve(w);
  return y.squaredNorm();
}

// Dimensionless smoothed loss g(s) - g(0) where
// g(s) = b erf(b / sqrt(1+s^2)) + sqrt(1+s^2) e^{-b^2/(1+s^2)} / sqrt(pi).
double smoothed_increment(double b, double s) {
  const double ab = std::abs(b);
  const double q = std::sqrt(1.0 + s * s);
  const double tail = ab * (std::erfc(ab) - std::erfc(ab / q));
  const double smooth = kInvSqrtPi * (q * std::exp(-b * b / (q * q)) - std::exp(-b * b));
  return tail + smooth;
}

CheckResult deterministic(std::string name, const BoundMargin& m, std::string what = "at") {
  CheckResult r;
  r.name = std::move(name);
  r.value = m.margin;
  r.status = m.holds() ? CheckStatus::Pass : CheckStatus::Fail;
  r.detail = what + "=" + format_double(m.at);
  return r;
}

Vector random_h_unit(const RegressionModel& model, CounterRng& rng) {
  Vector v(static_cast<Eigen::Index>(model.dimension()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  const double norm = std::sqrt(v.dot(model.covariance().h * v));
  return v / norm;
}

}  // namespace

std::string_view status_name(CheckStatus status) {
  switch (status) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Warn: return "warn";
    case CheckStatus::Fail: return "fail";
  }
  return "fail";
}

void write_report(std::ostream& out, std::span<const CheckResult> results) {
  for (const auto& r : results) {
    out << r.name << ',' << status_name(r.status) << ',' << format_double(r.value) << '\n';
  }
}

CheckStatus classify_z(double z) {
  if (!(z <= 4.0)) return CheckStatus::Fail;
  if (z > 3.0) return CheckStatus::Warn;
  return CheckStatus::Pass;
}

// ---------------------------------------------------------------------------

MonteCarloEstimate mc_expected_loss(const Vector& theta, const RegressionModel& model,
                                    std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1000) throw std::invalid_argument("mc_expected_loss: need >= 1000 samples");
  if (static_cast<std::size_t>(theta.size()) != model.dimension()) {
    throw std::invalid_argument("mc_expected_loss: dimension mismatch");
  }
  SampleGenerator gen(model, seed);
  // Welford.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 1; i <= n_samples; ++i) {
    const Sample s = gen.next();
    const double v = std::abs(s.y - s.x.dot(theta));
    const double delta = v - mean;
    mean += delta / static_cast<double>(i);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(n_samples);
  const double variance = m2 / (n - 1.0);
  return {mean, std::sqrt(variance / n)};
}

Vector fd_gradient(const SmoothedObjective& objective, const Vector& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be > 0");
  Vector g(theta.size());
  Vector probe = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    probe(j) = theta(j) + h;
    const double up = objective.expected_loss(probe);
    probe(j) = theta(j) - h;
    const double down = objective.expected_loss(probe);
    probe(j) = theta(j);
    g(j) = (up - down) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const SmoothedObjective& objective, const Vector& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_hessian: h must be > 0");
  const Eigen::Index d = theta.size();
  Matrix out(d, d);
  Vector probe = theta;
  auto f_at = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
    probe = theta;
    probe(i) += si * h;
    probe(j) += sj * h;
    return objective.expected_loss(probe);
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      const double v = (f_at(i, 1, j, 1) - f_at(i, 1, j, -1) - f_at(i, -1, j, 1) +
                        f_at(i, -1, j, -1)) /
                       (4.0 * h * h);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

BoundMargin check_alpha_bound(const SmoothedObjective& objective,
                              std::span<const double> z_grid) {
  const double sigma = objective.model().sigma();
  const double eta = objective.model().outliers().eta();
  const double constant = 20.0 * std::log(2.0 / (1.0 - eta));
  const double alpha0 = objective.alpha(0.0);
  BoundMargin worst;
  for (double z : z_grid) {
    if (z < 0.0) throw std::invalid_argument("check_alpha_bound: z must be >= 0");
    const double a = objective.alpha(z);
    const double lhs = std::abs(a - alpha0);
    const double rhs = constant * (z / sigma) * a;
    worst.update(rhs - lhs, z);
  }
  return worst;
}

SigmaFMargins check_sigma_f_bounds(const SmoothedObjective& objective,
                                   std::span<const Vector> thetas) {
  const double sigma = objective.model().sigma();
  const double keep = 1.0 - objective.effective_eta();
  SigmaFMargins out;
  for (const auto& theta : thetas) {
    const double s = objective.pred_error_sigma(theta);
    const double df = objective.excess_loss_at(s);
    const double lhs = s * s;
    const double linear = 4.0 * sigma / keep * df;
    const double quadratic = 10.0 / (keep * keep) * df * df;
    if (s >= sigma) out.large.update(quadratic - lhs, s);
    if (s <= sigma) out.small.update(linear - lhs, s);
    out.upper.update(linear + quadratic - lhs, s);
  }
  return out;
}

double check_avg_iterate_bound(std::span<const Vector> sequence,
                               const SmoothedObjective& objective) {
  if (sequence.empty()) throw std::invalid_argument("check_avg_iterate_bound: empty sequence");
  const auto& model = objective.model();
  const auto& cov = model.covariance();
  const Eigen::Index d = static_cast<Eigen::Index>(model.dimension());
  const double n = static_cast<double>(sequence.size());

  Vector mean_theta = Vector::Zero(d);
  Vector mean_grad = Vector::Zero(d);
  double mean_linear = 0.0;
  for (const auto& theta : sequence) {
    const Vector g = objective.gradient(theta);
    mean_theta += theta;
    mean_grad += g;
    mean_linear += g.dot(theta - model.theta_star());
  }
  mean_theta /= n;
  mean_grad /= n;
  mean_linear /= n;

  const Vector delta = mean_theta - model.theta_star();
  const double lhs = delta.dot(cov.h * delta);
  const double keep = 1.0 - objective.effective_eta();
  const double log_term = std::log(2.0 / (1.0 - model.outliers().eta()));
  const double sigma = model.sigma();
  const double rhs =
      2.0 * sigma * sigma / (keep * keep) * inverse_h_norm_sq(cov, mean_grad) +
      800.0 / (keep * keep) * log_term * log_term * mean_linear * mean_linear;
  return rhs - lhs;
}

// ---------------------------------------------------------------------------

double riemann_sum(std::uint64_t n) {
  const double nd = static_cast<double>(n);
  double total = 0.0;
  for (std::uint64_t t = 2; t + 1 <= n; ++t) {
    const double x = static_cast<double>(t) / nd;
    total += (1.0 / (x * x)) * (1.0 / std::sqrt(1.0 - x) - 1.0);
  }
  return total / nd;
}

ScalarLemmaReport check_scalar_lemmas() {
  ScalarLemmaReport report;

  std::vector<double> etas;
  for (int k = 0; k <= 9; ++k) etas.push_back(0.1 * k);
  for (double e : {0.95, 0.99, 0.999, 0.9999, 0.999999}) etas.push_back(e);
  std::vector<double> us = logspace(1e-6, 100.0, 801);
  us.insert(us.begin(), 0.0);
  for (double eta : etas) {
    const double rhs = 9.0 * std::log(2.0 / (1.0 - eta));
    for (double u : us) {
      const double lhs = u / (eta + (1.0 - eta) * std::exp(u));
      report.lambert.update(rhs - lhs, u);
    }
  }

  for (int i = 0; i <= 4000; ++i) {
    const double x = 10.0 * i / 4000.0;
    const double e = std::exp(-x * x);
    report.erf_constant.update(kErfConstant * e - e / 5.0, x);
    // x (erf(x/sqrt2) - erf x) + sqrt(2/pi) e^{-x^2/2} - e^{-x^2}/sqrt(pi), minus
    // the (sqrt2-1)/sqrt(pi) e^{-x^2} left side, written with erfc.
    const double h = x * (std::erfc(x) - std::erfc(x / std::numbers::sqrt2)) +
                     kSqrt2OverPi * (std::exp(-x * x / 2.0) - e);
    report.erf_main.update(h, x);
  }

  for (int i = 0; i <= 400; ++i) {
    const double b = -6.0 + 12.0 * i / 400.0;
    for (int j = 0; j <= 200; ++j) {
      const double s = j / 200.0;
      const double base = s * s * std::exp(-b * b);
      report.smoothed_constant.update(kErfConstant * base - base / 5.0, s);
      report.smoothed_main.update(smoothed_increment(b, s) - kErfConstant * base, s);
    }
  }

  for (std::uint64_t n : {10ULL, 100ULL, 1000ULL, 10000ULL}) {
    const double rhs = 3.0 * std::log(std::numbers::e * static_cast<double>(n));
    report.riemann.update(rhs - riemann_sum(n), static_cast<double>(n));
  }
  return report;
}

std::vector<CheckResult> ScalarLemmaReport::results() const {
  return {
      deterministic("check_scalar_lemmas/lambert", lambert, "u"),
      deterministic("check_scalar_lemmas/erf_constant", erf_constant, "x"),
      deterministic("check_scalar_lemmas/erf_main", erf_main, "x"),
      deterministic("check_scalar_lemmas/smoothed_constant", smoothed_constant, "s"),
      deterministic("check_scalar_lemmas/smoothed_main", smoothed_main, "s"),
      deterministic("check_scalar_lemmas/riemann", riemann, "n"),
  };
}

// ---------------------------------------------------------------------------

double moment_bound_second(double dist0_sq, double gamma0, double r2, std::uint64_t n) {
  const double log_en = std::log(std::numbers::e * static_cast<double>(n));
  return dist0_sq + gamma0 * gamma0 * r2 * log_en;
}

double moment_bound_fourth(double dist0_sq, double gamma0, double r2, std::uint64_t n) {
  const double log_en = std::log(std::numbers::e * static_cast<double>(n));
  const double g2 = gamma0 * gamma0;
  return dist0_sq * dist0_sq + 8.0 * g2 * log_en * r2 * dist0_sq +
         g2 * g2 * log_en * r2 * r2 *
             (8.0 * log_en + std::numbers::pi * std::numbers::pi / 3.0);
}

double MomentReport::worst_z() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto* rows : {&second, &fourth}) {
    for (const auto& r : *rows) worst = std::max(worst, r.z_score);
  }
  return worst;
}

CheckStatus MomentReport::status() const { return classify_z(worst_z()); }

MomentReport check_moment_bounds(const RegressionModel& model, const StepSchedule& schedule,
                                 std::uint64_t n, std::size_t replications,
                                 std::uint64_t seed, std::optional<Vector> theta0,
                                 std::size_t jobs) {
  if (replications < 100) {
    throw std::invalid_argument("check_moment_bounds: need >= 100 replications");
  }
  if (schedule.kind() != ScheduleKind::InvSqrt) {
    throw std::invalid_argument("check_moment_bounds: bound assumes gamma0 / sqrt(n)");
  }
  const Vector start =
      theta0.value_or(Vector::Zero(static_cast<Eigen::Index>(model.dimension())));
  const auto checkpoints = geometric_checkpoints(n);
  const std::size_t k = checkpoints.size();

  // dist[r * k + c] = |theta_n - theta*|^2 for replication r at checkpoint c.
  std::vector<double> dist(replications * k);
  parallel_for(replications, jobs, [&](std::size_t r) {
    SampleGenerator gen(model, derive_seed(seed, {r}));
    SgdState state = SgdState::start(start, L1Loss{});
    std::size_t c = 0;
    for (std::uint64_t step = 1; step <= n; ++step) {
      sgd_step(state, gen.next(), schedule);
      if (c < k && checkpoints[c] == step) {
        dist[r * k + c] = (state.theta - model.theta_star()).squaredNorm();
        ++c;
      }
    }
  });

  const double dist0 = (start - model.theta_star()).squaredNorm();
  const double reps = static_cast<double>(replications);
  MomentReport report;
  for (std::size_t c = 0; c < k; ++c) {
    for (int power : {2, 4}) {
      double sum = 0.0;
      double sum_sq = 0.0;
      for (std::size_t r = 0; r < replications; ++r) {
        const double v = power == 2 ? dist[r * k + c] : dist[r * k + c] * dist[r * k + c];
        sum += v;
        sum_sq += v * v;
      }
      MomentRow row;
      row.n = checkpoints[c];
      row.mean = sum / reps;
      const double var = std::max(0.0, (sum_sq - reps * row.mean * row.mean) / (reps - 1.0));
      row.std_error = std::sqrt(var / reps);
      row.bound = power == 2
                      ? moment_bound_second(dist0, schedule.gamma0(), model.covariance().r2, row.n)
                      : moment_bound_fourth(dist0, schedule.gamma0(), model.covariance().r2, row.n);
      const double gap = row.mean - row.bound;
      if (row.std_error > 0.0) row.z_score = gap / row.std_error;
      else row.z_score = gap <= 0.0 ? -std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::infinity();
      (power == 2 ? report.second : report.fourth).push_back(row);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

std::vector<RegressionModel> default_verify_models() {
  std::vector<RegressionModel> models;
  auto theta = [](std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
  };
  models.emplace_back(theta({1.0, -0.5, 0.25}), IdentityCovariance{3}, 1.0,
                      OutlierDistribution{});
  models.emplace_back(theta({0.3, 0.1, -0.7, 0.2}), inverse_k_spectrum(4, 11), 0.5,
                      OutlierDistribution::point_mass(0.3, 5.0));
  models.emplace_back(theta({0.5, 0.5, -0.5, 0.0, 1.0}), inverse_k_spectrum(5, 23), 2.0,
                      three_population_distribution(0.6));
  Matrix explicit_h(2, 2);
  explicit_h << 2.0, 0.5, 0.5, 1.0;
  models.emplace_back(theta({-1.0, 2.0}), ExplicitCovariance{explicit_h}, 1.0,
                      OutlierDistribution::point_mass(0.9, 50.0));
  models.emplace_back(
      theta({0.0, 0.4, -0.3}), SpectrumCovariance{{3.0, 1.0, 0.2}, 5}, 1.0,
      OutlierDistribution(0.8, {{0.5, PointMass{100.0}},
                                {0.3, UniformRange{-3.0, 7.0}},
                                {0.2, PointMass{-0.5}}}));
  return models;
}

std::vector<std::vector<Vector>> random_walk_sequences(const RegressionModel& model,
                                                       std::size_t count,
                                                       std::uint64_t seed) {
  CounterRng rng(seed);
  const Eigen::Index d = static_cast<Eigen::Index>(model.dimension());
  std::vector<std::vector<Vector>> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double scale = model.sigma() * std::pow(10.0, rng.uniform(-2.0, 1.5));
    const std::size_t length = 10 + rng.below(191);
    const double step = scale / std::sqrt(static_cast<double>(length));
    std::vector<Vector> seq;
    seq.reserve(length);
    Vector theta = model.theta_star();
    for (Eigen::Index i = 0; i < d; ++i) theta(i) += scale * rng.normal();
    for (std::size_t t = 0; t < length; ++t) {
      seq.push_back(theta);
      for (Eigen::Index i = 0; i < d; ++i) theta(i) += step * rng.normal();
    }
    out.push_back(std::move(seq));
  }
  return out;
}

const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names{
      "check_scalar_lemmas", "check_alpha_bound",      "check_sigma_f_bounds",
      "check_avg_iterate_bound", "fd_gradient",       "hessian_at_optimum",
      "mc_expected_loss",    "check_moment_bounds",
  };
  return names;
}

std::vector<CheckResult> run_verify_suite(const VerifyOptions& options) {
  const auto& names = verify_check_names();
  if (options.only && std::find(names.begin(), names.end(), *options.only) == names.end()) {
    throw std::invalid_argument("unknown check '" + *options.only + "'");
  }
  auto wanted = [&](std::string_view name) { return !options.only || *options.only == name; };

  const auto models = default_verify_models();
  std::vector<SmoothedObjective> objectives;
  for (const auto& m : models) objectives.emplace_back(m);
  auto model_name = [](std::string_view check, std::size_t k) {
    return std::string(check) + "/model_" + std::to_string(k);
  };

  std::vector<CheckResult> results;

  if (wanted("check_scalar_lemmas")) {
    for (auto& r : check_scalar_lemmas().results()) results.push_back(std::move(r));
  }

  if (wanted("check_alpha_bound")) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      auto grid = logspace(1e-6, 1e6, 241);
      for (auto& z : grid) z *= models[k].sigma();
      grid.insert(grid.begin(), 0.0);
      results.push_back(deterministic(model_name("check_alpha_bound", k),
                                      check_alpha_bound(objectives[k], grid), "z"));
    }
  }

  if (wanted("check_sigma_f_bounds")) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      CounterRng rng(derive_seed(options.seed, {1, k}));
      const Vector u = random_h_unit(models[k], rng);
      std::vector<Vector> thetas{models[k].theta_star()};
      for (double t : logspace(1e-3, 1e3, 121)) {
        thetas.push_back(models[k].theta_star() + (t * models[k].sigma()) * u);
      }
      const auto m = check_sigma_f_bounds(objectives[k], thetas);
      const auto base = model_name("check_sigma_f_bounds", k);
      results.push_back(deterministic(base + "/large", m.large, "sigma_theta"));
      results.push_back(deterministic(base + "/small", m.small, "sigma_theta"));
      results.push_back(deterministic(base + "/upper", m.upper, "sigma_theta"));
    }
  }

  if (wanted("check_avg_iterate_bound")) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      BoundMargin worst;
      const auto seqs = random_walk_sequences(models[k], 20, derive_seed(options.seed, {2, k}));
      for (std::size_t i = 0; i < seqs.size(); ++i) {
        worst.update(check_avg_iterate_bound(seqs[i], objectives[k]), static_cast<double>(i));
      }
      results.push_back(deterministic(model_name("check_avg_iterate_bound", k), worst, "sequence"));
    }
  }

  if (wanted("fd_gradient")) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      CounterRng rng(derive_seed(options.seed, {3, k}));
      BoundMargin worst;
      for (int i = 0; i < 10; ++i) {
        const double t = models[k].sigma() * std::pow(10.0, rng.uniform(-1.0, 1.0));
        const Vector theta = models[k].theta_star() + t * random_h_unit(models[k], rng);
        const Vector exact = objectives[k].gradient(theta);
        const Vector approx = fd_gradient(objectives[k], theta, 1e-5);
        const double rel = (approx - exact).norm() / exact.norm();
        worst.update(1e-5 - rel, t);
      }
      results.push_back(deterministic(model_name("fd_gradient", k), worst, "sigma_theta"));
    }
  }

  if (wanted("hessian_at_optimum")) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      const Matrix exact = objectives[k].hessian_at_optimum();
      const Matrix approx = fd_hessian(objectives[k], models[k].theta_star(), 1e-4);
      BoundMargin m;
      m.update(1e-3 - (approx - exact).norm() / exact.norm(), 0.0);
      results.push_back(deterministic(model_name("hessian_at_optimum", k), m));
    }
  }

  if (wanted("mc_expected_loss")) {
    for (std::size_t k = 0; k < objectives.size(); ++k) {
      CounterRng rng(derive_seed(options.seed, {4, k}));
      const Vector theta = models[k].theta_star() +
                           models[k].sigma() * rng.uniform(0.1, 3.0) * random_h_unit(models[k], rng);
      const auto mc = mc_expected_loss(theta, models[k], 200000, derive_seed(options.seed, {5, k}));
      const double z = std::abs(objectives[k].expected_loss(theta) - mc.mean) / mc.std_error;
      results.push_back({model_name("mc_expected_loss", k), classify_z(z), z, {}});
    }
  }

  if (wanted("check_moment_bounds")) {
    Vector theta_star(2);
    theta_star << 1.0, -1.0;
    const RegressionModel model(theta_star, IdentityCovariance{2}, 1.0,
                                OutlierDistribution::point_mass(0.3, 20.0));
    const auto report = check_moment_bounds(model, StepSchedule::inv_sqrt(0.5), 1000, 200,
                                            derive_seed(options.seed, {6}), {}, options.jobs);
    results.push_back({"check_moment_bounds", report.status(), report.worst_z(), {}});
  }

  return results;
}

bool suite_passed(std::span<const CheckResult> results) {
  return std::none_of(results.begin(), results.end(),
                      [](const CheckResult& r) { return r.status == CheckStatus::Fail; });
}

}  // namespace streamrobust

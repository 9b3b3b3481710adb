#pragma once

// Numerical oracles and inequality checkers for the smoothed-objective
// identities and the convergence-proof lemmas that are testable pathwise.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamrobust/analytic.hpp"
#include "streamrobust/model.hpp"

namespace streamrobust {

enum class CheckStatus { Pass, Warn, Fail };

std::string_view status_name(CheckStatus status);

/// One report line: `name,status,value`. For deterministic checks `value` is
/// the worst margin (RHS - LHS); for statistical checks it is the z-score.
struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double value = 0.0;
  std::string detail;
};

void write_report(std::ostream& out, std::span<const CheckResult> results);

inline constexpr double kDeterministicTolerance = 1e-10;

/// Worst margin over a grid and where it occurred.
struct BoundMargin {
  double margin = std::numeric_limits<double>::infinity();
  double at = 0.0;

  void update(double m, double where) {
    if (m < margin) {
      margin = m;
      at = where;
    }
  }
  bool holds(double tolerance = kDeterministicTolerance) const {
    return margin >= -tolerance;
  }
};

// --- Brute-force oracles -----------------------------------------------------

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error of |y - <x, theta>| over fresh draws.
MonteCarloEstimate mc_expected_loss(const Vector& theta, const RegressionModel& model,
                                    std::size_t n_samples, std::uint64_t seed);

/// Central differences of expected_loss, one coordinate at a time.
Vector fd_gradient(const SmoothedObjective& objective, const Vector& theta, double h);

/// Second-order central differences of expected_loss.
Matrix fd_hessian(const SmoothedObjective& objective, const Vector& theta, double h);

// --- Inequality checkers -----------------------------------------------------

/// |alpha(z) - alpha(0)| <= 20 ln(2/(1-eta)) (z/sigma) alpha(z).
BoundMargin check_alpha_bound(const SmoothedObjective& objective,
                              std::span<const double> z_grid);

struct SigmaFMargins {
  BoundMargin large;  // sigma_theta >= sigma: s^2 <= 10/(1-e)^2 df^2
  BoundMargin small;  // sigma_theta <= sigma: s^2 <= 4 sigma/(1-e) df
  BoundMargin upper;  // s^2 <= 4 sigma/(1-e) df + 10/(1-e)^2 df^2 (point mass law)
};

/// Margins located by sigma_theta. df = f(theta) - f(theta*).
SigmaFMargins check_sigma_f_bounds(const SmoothedObjective& objective,
                                   std::span<const Vector> thetas);

/// Pathwise averaged-iterate bound for the sequence theta_0 .. theta_{n-1}:
///   |theta_bar - theta*|_H^2 <= 2 sigma^2/(1-e)^2 |mean f'|_{H^-1}^2
///                              + 800/(1-e)^2 ln^2(2/(1-eta)) (mean <f', theta - theta*>)^2
/// Returns RHS - LHS.
double check_avg_iterate_bound(std::span<const Vector> sequence,
                               const SmoothedObjective& objective);

struct ScalarLemmaReport {
  BoundMargin lambert;       // u / (eta + (1-eta) e^u) <= 9 ln(2/(1-eta))
  BoundMargin erf_constant;  // e^{-x^2}/5 <= (sqrt2-1)/sqrt(pi) e^{-x^2}
  BoundMargin erf_main;      // (sqrt2-1)/sqrt(pi) e^{-x^2} <= x(erf(x/sqrt2)-erf x) + ...
  BoundMargin smoothed_constant;  // s^2/5 e^{-b^2} <= (sqrt2-1)/sqrt(pi) s^2 e^{-b^2}
  BoundMargin smoothed_main;      // (sqrt2-1)/sqrt(pi) s^2 e^{-b^2} <= g(s) - g(0)
  BoundMargin riemann;       // (1/n) sum_{t=2}^{n-1} (n/t)^2 ((1-t/n)^{-1/2} - 1) <= 3 ln(en)

  std::vector<CheckResult> results() const;
};

ScalarLemmaReport check_scalar_lemmas();

/// Left-hand side of the Riemann-sum bound, summed directly.
double riemann_sum(std::uint64_t n);

/// Second/fourth moment bounds on the last SGD iterate in Euclidean norm:
///   C_n = |d0|^2 + g^2 R^2 ln(en)
///   D_n = |d0|^4 + 8 g^2 ln(en) R^2 |d0|^2 + g^4 ln(en) R^4 (8 ln(en) + pi^2/3)
double moment_bound_second(double dist0_sq, double gamma0, double r2, std::uint64_t n);
double moment_bound_fourth(double dist0_sq, double gamma0, double r2, std::uint64_t n);

struct MomentRow {
  std::uint64_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double bound = 0.0;
  double z_score = 0.0;  // (mean - bound) / std_error; -inf if std_error == 0 and mean <= bound
};

struct MomentReport {
  std::vector<MomentRow> second;
  std::vector<MomentRow> fourth;

  double worst_z() const;
  CheckStatus status() const;
};

/// Replicated l1-SGD runs with an inverse-square-root schedule from theta0.
MomentReport check_moment_bounds(const RegressionModel& model, const StepSchedule& schedule,
                                 std::uint64_t n, std::size_t replications,
                                 std::uint64_t seed, std::optional<Vector> theta0 = {},
                                 std::size_t jobs = 1);

/// Statistical check classification: pass within 3 standard errors, warning
/// up to 4, failure beyond.
CheckStatus classify_z(double z);

// --- Suite -------------------------------------------------------------------

/// Models the suite runs against: a spread of dimensions, conditionings and
/// contamination laws (point masses, uniforms, mixtures, eta up to 0.9).
std::vector<RegressionModel> default_verify_models();

/// Random-walk iterate sequences around theta* at several length scales.
std::vector<std::vector<Vector>> random_walk_sequences(const RegressionModel& model,
                                                       std::size_t count,
                                                       std::uint64_t seed);

const std::vector<std::string>& verify_check_names();

struct VerifyOptions {
  std::optional<std::string> only;
  std::uint64_t seed = 20240607;
  std::size_t jobs = 1;
};

/// Runs the named checks (or all). Throws std::invalid_argument on an unknown name.
std::vector<CheckResult> run_verify_suite(const VerifyOptions& options);

/// True iff no deterministic failure and no statistical check beyond 4 SE.
bool suite_passed(std::span<const CheckResult> results);

}  // namespace streamrobust

#pragma once

// Generative model y = <x, theta*> + eps + b with Gaussian features, Gaussian
// dense noise and oblivious sparse corruption, plus the value types shared by
// every other module.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "streamrobust/rng.hpp"

namespace streamrobust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an explicit covariance matrix is not symmetric positive definite.
class NotPositiveDefinite : public std::invalid_argument {
 public:
  NotPositiveDefinite(const std::string& what, double eigenvalue)
      : std::invalid_argument(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

// ---------------------------------------------------------------------------
// Covariance

struct IdentityCovariance {
  std::size_t dimension = 0;
};

/// Eigenvalues with a random orthogonal basis drawn from `basis_seed`.
struct SpectrumCovariance {
  std::vector<double> eigenvalues;
  std::uint64_t basis_seed = 0;
};

struct ExplicitCovariance {
  Matrix matrix;
};

using CovarianceSpec =
    std::variant<IdentityCovariance, SpectrumCovariance, ExplicitCovariance>;

/// Spectrum {1, 1/2, ..., 1/d}: the ill-conditioned design with kappa = 1/d.
SpectrumCovariance inverse_k_spectrum(std::size_t d, std::uint64_t basis_seed);

std::size_t covariance_dimension(const CovarianceSpec& spec);

/// A realized covariance H = chol * chol^T with mu = lambda_min(H) and
/// r2 = trace(H).
struct Covariance {
  Matrix h;
  Matrix chol;
  double mu = 0.0;
  double r2 = 0.0;

  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(h.rows());
  }
};

Covariance realize_covariance(const CovarianceSpec& spec);

/// Haar-distributed orthogonal matrix: QR of a seeded Gaussian matrix with the
/// signs of diag(R) folded into Q.
Matrix random_orthogonal(std::size_t d, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Outliers

struct PointMass {
  double value = 0.0;
};

struct UniformRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct OutlierComponent {
  double weight = 1.0;
  std::variant<PointMass, UniformRange> law;
};

/// Law of the sparse corruption b: zero with probability 1 - eta, otherwise a
/// draw from a finite mixture of point masses and uniform intervals.
class OutlierDistribution {
 public:
  /// No corruption: eta = 0.
  OutlierDistribution();
  OutlierDistribution(double eta, std::vector<OutlierComponent> components);

  static OutlierDistribution point_mass(double eta, double value);
  static OutlierDistribution uniform(double eta, double lo, double hi);

  double eta() const noexcept { return eta_; }
  std::span<const OutlierComponent> components() const noexcept {
    return components_;
  }

  /// Draw from the full law (mass 1 - eta at zero).
  double sample(CounterRng& rng) const;
  /// Draw from the law of b conditional on b != 0.
  double sample_conditional(CounterRng& rng) const;

  /// Same mixture with every outlier value multiplied by `factor`.
  OutlierDistribution scaled(double factor) const;

 private:
  double eta_ = 0.0;
  std::vector<OutlierComponent> components_;
};

// ---------------------------------------------------------------------------
// Model

class RegressionModel {
 public:
  RegressionModel(Vector theta_star, CovarianceSpec covariance, double sigma,
                  OutlierDistribution outliers);

  const Vector& theta_star() const noexcept { return theta_star_; }
  const CovarianceSpec& covariance_spec() const noexcept { return spec_; }
  const Covariance& covariance() const noexcept { return covariance_; }
  double sigma() const noexcept { return sigma_; }
  const OutlierDistribution& outliers() const noexcept { return outliers_; }
  std::size_t dimension() const noexcept {
    return static_cast<std::size_t>(theta_star_.size());
  }

  RegressionModel with_outliers(OutlierDistribution outliers) const;
  RegressionModel with_theta_star(Vector theta_star) const;

 private:
  Vector theta_star_;
  CovarianceSpec spec_;
  Covariance covariance_;
  double sigma_;
  OutlierDistribution outliers_;
};

// ---------------------------------------------------------------------------
// Step sizes and losses

enum class ScheduleKind { InvSqrt, Constant };

class StepSchedule {
 public:
  StepSchedule(double gamma0, ScheduleKind kind);

  static StepSchedule inv_sqrt(double gamma0) {
    return {gamma0, ScheduleKind::InvSqrt};
  }
  static StepSchedule constant(double gamma0) {
    return {gamma0, ScheduleKind::Constant};
  }

  double gamma0() const noexcept { return gamma0_; }
  ScheduleKind kind() const noexcept { return kind_; }

  /// Step size for iteration n >= 1.
  double gamma(std::uint64_t n) const;

 private:
  double gamma0_;
  ScheduleKind kind_;
};

inline double schedule_gamma(const StepSchedule& schedule, std::uint64_t n) {
  return schedule.gamma(n);
}

struct L1Loss {};
struct L2Loss {};
struct HuberLoss {
  double tau = 1.0;
};

using LossKind = std::variant<L1Loss, L2Loss, HuberLoss>;

LossKind huber(double tau);
std::string loss_label(const LossKind& loss);

// ---------------------------------------------------------------------------
// Streams and runs

struct Sample {
  Vector x;
  double y = 0.0;
  /// True iff b != 0 for this draw. Only the oracle baseline may read it.
  bool corrupted = false;
};

/// Iterate, running average and iteration count of averaged SGD.
/// theta_bar is the mean of theta_0 .. theta_{n-1}; at n = 0 it equals theta_0.
struct SgdState {
  std::uint64_t n = 0;
  Vector theta;
  Vector theta_bar;
  LossKind loss = L1Loss{};

  static SgdState start(Vector theta0, LossKind loss);
};

struct Checkpoint {
  std::uint64_t n = 0;
  double err_h = 0.0;       // |theta_bar - theta*|_H^2
  double err_2 = 0.0;       // |theta_bar - theta*|^2
  double err_last_h = 0.0;  // |theta_n - theta*|_H^2
};

struct RunRecord {
  std::vector<Checkpoint> checkpoints;
  std::string config_digest;
  std::uint64_t seed = 0;

  /// Checks strictly increasing iterations and nonnegative errors.
  void validate() const;
  const Checkpoint& final() const;
};

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string digest_hex(std::string_view text);

/// Shortest round-trip decimal representation (locale independent).
std::string format_double(double value);

}  // namespace streamrobust

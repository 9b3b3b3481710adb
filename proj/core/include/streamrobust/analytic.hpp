#pragma once

// Closed forms of the expected l1 loss f(theta) = E|y - <x, theta>| under the
// Gaussian model. Averaging over x and eps turns the residual into
// N(b, sigma^2 + sigma_theta^2), so f depends on theta only through the
// prediction error sigma_theta = |theta - theta*|_H.

#include <cstddef>

#include "streamrobust/model.hpp"
#include "streamrobust/quadrature.hpp"

namespace streamrobust {

inline constexpr std::size_t kDefaultQuadratureOrder = 64;

/// E[exp(-b^2 / (2 s^2)) | b != 0]. Point masses are exact; uniform components
/// use composite Gauss-Legendre with `rule`.
double outlier_gauss_moment(const OutlierDistribution& dist, double s,
                            const GaussLegendreRule& rule);
double outlier_gauss_moment(const OutlierDistribution& dist, double s,
                            std::size_t order = kDefaultQuadratureOrder);

/// Effective outlier proportion eta * (1 - E[exp(-b^2/(2 sigma^2)) | b != 0]).
/// Lies in [0, eta).
double effective_eta(const OutlierDistribution& dist, double sigma,
                     std::size_t order = kDefaultQuadratureOrder);

/// Folded-normal mean E|N(b, s^2)|.
double folded_normal_mean(double b, double s);

class SmoothedObjective {
 public:
  explicit SmoothedObjective(RegressionModel model,
                             std::size_t quadrature_order = kDefaultQuadratureOrder);

  const RegressionModel& model() const noexcept { return model_; }
  std::size_t quadrature_order() const noexcept { return rule_.order(); }

  /// |theta - theta*|_H.
  double pred_error_sigma(const Vector& theta) const;

  double effective_eta() const;

  /// f as a function of the prediction error.
  double loss_at(double sigma_theta) const;
  double expected_loss(const Vector& theta) const;

  /// f(theta) - f(theta*) evaluated without subtracting two large numbers.
  double excess_loss_at(double sigma_theta) const;
  double excess_loss(const Vector& theta) const;

  /// alpha(z) = sqrt(2/pi) (sigma^2 + z^2)^{-1/2} E_b[exp(-b^2 / (2(sigma^2 + z^2)))],
  /// expectation over the full law of b.
  double alpha(double z) const;

  /// f'(theta) = alpha(sigma_theta) H (theta - theta*).
  Vector gradient(const Vector& theta) const;

  /// f''(theta*) = sqrt(2/pi) (1 - eta_eff) / sigma * H.
  Matrix hessian_at_optimum() const;

 private:
  // E_b[g(b)] over the full law of b.
  template <class G>
  double expect_full(G&& g, double scale) const;

  RegressionModel model_;
  GaussLegendreRule rule_;
};

}  // namespace streamrobust

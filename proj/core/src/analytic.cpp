#include "streamrobust/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "streamrobust/detail/overloaded.hpp"

namespace streamrobust {

namespace {

constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2/pi)

// Integrands vary on the length scale `scale`; keep each panel within a few
// multiples of it.
std::size_t panel_count(double lo, double hi, double scale) {
  const double panels = std::ceil((hi - lo) / (16.0 * scale));
  return static_cast<std::size_t>(std::clamp(panels, 1.0, 4096.0));
}

// E[g(b) | b != 0] for the mixture.
template <class G>
double expect_conditional(const OutlierDistribution& dist, G&& g,
                          const GaussLegendreRule& rule, double scale) {
  double total = 0.0;
  for (const auto& c : dist.components()) {
    if (c.weight == 0.0) continue;
    const double value = std::visit(
        detail::Overloaded{
            [&](const PointMass& p) { return g(p.value); },
            [&](const UniformRange& r) {
              const std::size_t panels = panel_count(r.lo, r.hi, scale);
              return rule.integrate(g, r.lo, r.hi, panels) / (r.hi - r.lo);
            },
        },
        c.law);
    total += c.weight * value;
  }
  return total;
}

}  // namespace

double folded_normal_mean(double b, double s) {
  const double ab = std::abs(b);
  return kSqrt2OverPi * s * std::exp(-b * b / (2.0 * s * s)) +
         ab * std::erf(ab / (std::numbers::sqrt2 * s));
}

double outlier_gauss_moment(const OutlierDistribution& dist, double s,
                            const GaussLegendreRule& rule) {
  if (!(s > 0.0)) throw std::invalid_argument("outlier_gauss_moment: s must be > 0");
  const double two_s2 = 2.0 * s * s;
  return expect_conditional(
      dist, [two_s2](double b) { return std::exp(-b * b / two_s2); }, rule, s);
}

double outlier_gauss_moment(const OutlierDistribution& dist, double s,
                            std::size_t order) {
  return outlier_gauss_moment(dist, s, gauss_legendre(order));
}

double effective_eta(const OutlierDistribution& dist, double sigma, std::size_t order) {
  if (!(sigma > 0.0)) throw std::invalid_argument("effective_eta: sigma must be > 0");
  return dist.eta() * (1.0 - outlier_gauss_moment(dist, sigma, order));
}

// ---------------------------------------------------------------------------

SmoothedObjective::SmoothedObjective(RegressionModel model, std::size_t quadrature_order)
    : model_(std::move(model)), rule_() {
  if (quadrature_order < 16) {
    throw std::invalid_argument("smoothed objective: quadrature order must be >= 16");
  }
  rule_ = gauss_legendre(quadrature_order);
}

template <class G>
double SmoothedObjective::expect_full(G&& g, double scale) const {
  const auto& dist = model_.outliers();
  const double clean = g(0.0);
  if (dist.eta() == 0.0) return clean;
  return (1.0 - dist.eta()) * clean +
         dist.eta() * expect_conditional(dist, g, rule_, scale);
}

double SmoothedObjective::pred_error_sigma(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != model_.dimension()) {
    throw std::invalid_argument("pred_error_sigma: dimension mismatch");
  }
  const Vector delta = theta - model_.theta_star();
  const double q = delta.dot(model_.covariance().h * delta);
  return std::sqrt(std::max(q, 0.0));
}

double SmoothedObjective::effective_eta() const {
  const auto& dist = model_.outliers();
  return dist.eta() * (1.0 - outlier_gauss_moment(dist, model_.sigma(), rule_));
}

double SmoothedObjective::loss_at(double sigma_theta) const {
  const double s = std::hypot(model_.sigma(), sigma_theta);
  return expect_full([s](double b) { return folded_normal_mean(b, s); }, s);
}

double SmoothedObjective::expected_loss(const Vector& theta) const {
  return loss_at(pred_error_sigma(theta));
}

double SmoothedObjective::excess_loss_at(double sigma_theta) const {
  const double sigma = model_.sigma();
  const double s = std::hypot(sigma, sigma_theta);
  // s - sigma without cancellation.
  const double ds = sigma_theta * sigma_theta / (s + sigma);
  const auto term = [&](double b) {
    const double ab = std::abs(b);
    if (ab == 0.0) return kSqrt2OverPi * ds;
    const double smooth = kSqrt2OverPi * (s * std::exp(-b * b / (2.0 * s * s)) -
                                          sigma * std::exp(-b * b / (2.0 * sigma * sigma)));
    const double tail = ab * (std::erfc(ab / (std::numbers::sqrt2 * sigma)) -
                              std::erfc(ab / (std::numbers::sqrt2 * s)));
    return smooth + tail;
  };
  return expect_full(term, sigma);
}

double SmoothedObjective::excess_loss(const Vector& theta) const {
  return excess_loss_at(pred_error_sigma(theta));
}

double SmoothedObjective::alpha(double z) const {
  if (!(z >= 0.0)) throw std::invalid_argument("alpha: z must be >= 0");
  const double s2 = model_.sigma() * model_.sigma() + z * z;
  const double s = std::sqrt(s2);
  const double moment =
      expect_full([s2](double b) { return std::exp(-b * b / (2.0 * s2)); }, s);
  return kSqrt2OverPi / s * moment;
}

Vector SmoothedObjective::gradient(const Vector& theta) const {
  const double sigma_theta = pred_error_sigma(theta);
  return alpha(sigma_theta) * (model_.covariance().h * (theta - model_.theta_star()));
}

Matrix SmoothedObjective::hessian_at_optimum() const {
  return (kSqrt2OverPi * (1.0 - effective_eta()) / model_.sigma()) *
         model_.covariance().h;
}

}  // namespace streamrobust

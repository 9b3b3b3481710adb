#include "streamrobust/model.hpp"

#include "streamrobust/detail/overloaded.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace streamrobust {

namespace {

using detail::Overloaded;

Covariance from_matrix(Matrix h) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  if (eig.info() != Eigen::Success) {
    throw std::invalid_argument("covariance: eigendecomposition failed");
  }
  const double lambda_min = eig.eigenvalues().minCoeff();
  if (!(lambda_min > 0.0)) {
    std::ostringstream msg;
    msg << "covariance is not positive definite: smallest eigenvalue "
        << lambda_min;
    throw NotPositiveDefinite(msg.str(), lambda_min);
  }
  const Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(
        "covariance: Cholesky factorization failed despite positive spectrum",
        lambda_min);
  }
  Covariance out;
  out.chol = llt.matrixL();
  out.mu = lambda_min;
  out.r2 = h.trace();
  out.h = std::move(h);
  return out;
}

}  // namespace

SpectrumCovariance inverse_k_spectrum(std::size_t d, std::uint64_t basis_seed) {
  SpectrumCovariance spec;
  spec.basis_seed = basis_seed;
  spec.eigenvalues.reserve(d);
  for (std::size_t k = 1; k <= d; ++k) {
    spec.eigenvalues.push_back(1.0 / static_cast<double>(k));
  }
  return spec;
}

std::size_t covariance_dimension(const CovarianceSpec& spec) {
  return std::visit(
      Overloaded{
          [](const IdentityCovariance& c) { return c.dimension; },
          [](const SpectrumCovariance& c) { return c.eigenvalues.size(); },
          [](const ExplicitCovariance& c) {
            return static_cast<std::size_t>(c.matrix.rows());
          },
      },
      spec);
}

Matrix random_orthogonal(std::size_t d, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto n = static_cast<Eigen::Index>(d);
  Matrix g(n, n);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  const Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Covariance realize_covariance(const CovarianceSpec& spec) {
  return std::visit(
      Overloaded{
          [](const IdentityCovariance& c) {
            if (c.dimension == 0) {
              throw std::invalid_argument("covariance: dimension must be >= 1");
            }
            const auto n = static_cast<Eigen::Index>(c.dimension);
            Covariance out;
            out.h = Matrix::Identity(n, n);
            out.chol = Matrix::Identity(n, n);
            out.mu = 1.0;
            out.r2 = static_cast<double>(c.dimension);
            return out;
          },
          [](const SpectrumCovariance& c) {
            if (c.eigenvalues.empty()) {
              throw std::invalid_argument("covariance: empty spectrum");
            }
            for (double lambda : c.eigenvalues) {
              if (!(lambda > 0.0) || !std::isfinite(lambda)) {
                throw NotPositiveDefinite(
                    "covariance spectrum has non-positive eigenvalue " +
                        format_double(lambda),
                    lambda);
              }
            }
            const std::size_t d = c.eigenvalues.size();
            const Matrix q = random_orthogonal(d, c.basis_seed);
            const Vector lambda = Eigen::Map<const Vector>(
                c.eigenvalues.data(), static_cast<Eigen::Index>(d));
            Matrix h = q * lambda.asDiagonal() * q.transpose();
            h = 0.5 * (h + h.transpose());
            Covariance out = from_matrix(std::move(h));
            // Exact values from the request rather than the recomputed ones.
            out.mu = lambda.minCoeff();
            out.r2 = lambda.sum();
            return out;
          },
          [](const ExplicitCovariance& c) {
            const Matrix& m = c.matrix;
            if (m.rows() == 0 || m.rows() != m.cols()) {
              throw std::invalid_argument("covariance: matrix must be square");
            }
            if ((m - m.transpose()).cwiseAbs().maxCoeff() >
                1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
              throw std::invalid_argument("covariance: matrix is not symmetric");
            }
            return from_matrix(m);
          },
      },
      spec);
}

// ---------------------------------------------------------------------------

OutlierDistribution::OutlierDistribution()
    : eta_(0.0), components_{{1.0, PointMass{0.0}}} {}

OutlierDistribution::OutlierDistribution(double eta,
                                         std::vector<OutlierComponent> components)
    : eta_(eta), components_(std::move(components)) {
  if (!(eta_ >= 0.0 && eta_ < 1.0)) {
    throw std::invalid_argument("outliers: eta must lie in [0, 1), got " +
                                format_double(eta_));
  }
  if (components_.empty()) {
    throw std::invalid_argument("outliers: at least one component is required");
  }
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0)) {
      throw std::invalid_argument("outliers: negative component weight");
    }
    if (const auto* u = std::get_if<UniformRange>(&c.law); u && !(u->lo < u->hi)) {
      throw std::invalid_argument("outliers: uniform component needs lo < hi");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("outliers: component weights sum to " +
                                format_double(total) + ", expected 1");
  }
}

OutlierDistribution OutlierDistribution::point_mass(double eta, double value) {
  return {eta, {{1.0, PointMass{value}}}};
}

OutlierDistribution OutlierDistribution::uniform(double eta, double lo, double hi) {
  return {eta, {{1.0, UniformRange{lo, hi}}}};
}

double OutlierDistribution::sample(CounterRng& rng) const {
  // Always consume the same number of draws for the Bernoulli so that the
  // corruption pattern depends only on eta and the seed.
  const bool corrupt = rng.uniform() < eta_;
  return corrupt ? sample_conditional(rng) : 0.0;
}

double OutlierDistribution::sample_conditional(CounterRng& rng) const {
  const OutlierComponent* chosen = &components_.back();
  if (components_.size() > 1) {
    double u = rng.uniform();
    for (const auto& c : components_) {
      if (u < c.weight) {
        chosen = &c;
        break;
      }
      u -= c.weight;
    }
  }
  return std::visit(Overloaded{
                        [](const PointMass& p) { return p.value; },
                        [&rng](const UniformRange& r) { return rng.uniform(r.lo, r.hi); },
                    },
                    chosen->law);
}

OutlierDistribution OutlierDistribution::scaled(double factor) const {
  std::vector<OutlierComponent> out = components_;
  for (auto& c : out) {
    std::visit(Overloaded{
                   [factor](PointMass& p) { p.value *= factor; },
                   [factor](UniformRange& r) {
                     r.lo *= factor;
                     r.hi *= factor;
                     if (r.lo > r.hi) std::swap(r.lo, r.hi);
                   },
               },
               c.law);
  }
  return {eta_, std::move(out)};
}

// ---------------------------------------------------------------------------

RegressionModel::RegressionModel(Vector theta_star, CovarianceSpec covariance,
                                 double sigma, OutlierDistribution outliers)
    : theta_star_(std::move(theta_star)),
      spec_(std::move(covariance)),
      covariance_(realize_covariance(spec_)),
      sigma_(sigma),
      outliers_(std::move(outliers)) {
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) {
    throw std::invalid_argument("model: sigma must be positive and finite");
  }
  if (covariance_.dimension() != dimension()) {
    throw std::invalid_argument("model: theta* has dimension " +
                                std::to_string(dimension()) +
                                " but covariance has dimension " +
                                std::to_string(covariance_.dimension()));
  }
}

RegressionModel RegressionModel::with_outliers(OutlierDistribution outliers) const {
  RegressionModel copy = *this;
  copy.outliers_ = std::move(outliers);
  return copy;
}

RegressionModel RegressionModel::with_theta_star(Vector theta_star) const {
  if (theta_star.size() != theta_star_.size()) {
    throw std::invalid_argument("model: theta* dimension mismatch");
  }
  RegressionModel copy = *this;
  copy.theta_star_ = std::move(theta_star);
  return copy;
}

// ---------------------------------------------------------------------------

StepSchedule::StepSchedule(double gamma0, ScheduleKind kind)
    : gamma0_(gamma0), kind_(kind) {
  if (!(gamma0_ > 0.0) || !std::isfinite(gamma0_)) {
    throw std::invalid_argument("schedule: gamma0 must be positive and finite");
  }
}

double StepSchedule::gamma(std::uint64_t n) const {
  if (n == 0) throw std::invalid_argument("schedule: iteration index starts at 1");
  if (kind_ == ScheduleKind::Constant) return gamma0_;
  return gamma0_ / std::sqrt(static_cast<double>(n));
}

LossKind huber(double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("huber: tau must be positive");
  return HuberLoss{tau};
}

std::string loss_label(const LossKind& loss) {
  return std::visit(Overloaded{
                        [](const L1Loss&) { return std::string("l1"); },
                        [](const L2Loss&) { return std::string("l2"); },
                        [](const HuberLoss& h) { return "huber_" + format_double(h.tau); },
                    },
                    loss);
}

SgdState SgdState::start(Vector theta0, LossKind loss) {
  if (const auto* h = std::get_if<HuberLoss>(&loss); h && !(h->tau > 0.0)) {
    throw std::invalid_argument("huber: tau must be positive");
  }
  SgdState state;
  state.theta_bar = theta0;
  state.theta = std::move(theta0);
  state.loss = loss;
  return state;
}

void RunRecord::validate() const {
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const auto& c = checkpoints[i];
    if (i > 0 && c.n <= checkpoints[i - 1].n) {
      throw std::invalid_argument("run record: checkpoint iterations must increase");
    }
    if (!(c.err_h >= 0.0 && c.err_2 >= 0.0 && c.err_last_h >= 0.0)) {
      throw std::invalid_argument("run record: negative or NaN error at n = " +
                                  std::to_string(c.n));
    }
  }
}

const Checkpoint& RunRecord::final() const {
  if (checkpoints.empty()) throw std::logic_error("run record has no checkpoints");
  return checkpoints.back();
}

std::string digest_hex(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  static constexpr char kHex[] = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = kHex[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

}  // namespace streamrobust

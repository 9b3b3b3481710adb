#include "streamrobust/optimizer.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "streamrobust/datagen.hpp"
#include "streamrobust/detail/overloaded.hpp"

namespace streamrobust {

namespace {

double sgn(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

void validate_plan(const std::vector<std::uint64_t>& plan, std::uint64_t n_steps) {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan[i] == 0 || plan[i] > n_steps) {
      throw std::invalid_argument("checkpoint " + std::to_string(plan[i]) +
                                  " outside [1, " + std::to_string(n_steps) + "]");
    }
    if (i > 0 && plan[i] <= plan[i - 1]) {
      throw std::invalid_argument("checkpoint plan must be strictly increasing");
    }
  }
}

std::string exhausted_message(std::uint64_t consumed, std::uint64_t wanted) {
  return "sample stream exhausted after " + std::to_string(consumed) + " of " +
         std::to_string(wanted) + " samples";
}

}  // namespace

double update_weight(const LossKind& loss, double residual) {
  return std::visit(detail::Overloaded{
                        [residual](const L1Loss&) { return sgn(residual); },
                        [residual](const L2Loss&) { return residual; },
                        [residual](const HuberLoss& h) {
                          return std::abs(residual) <= h.tau ? residual
                                                             : h.tau * sgn(residual);
                        },
                    },
                    loss);
}

void sgd_step(SgdState& state, const Sample& sample, const StepSchedule& schedule) {
  if (sample.x.size() != state.theta.size()) {
    throw std::invalid_argument("sgd_step: sample dimension mismatch");
  }
  const double np1 = static_cast<double>(state.n + 1);
  const double gamma = schedule.gamma(state.n + 1);
  const double residual = sample.y - sample.x.dot(state.theta);
  const double weight = update_weight(state.loss, residual);

  state.theta_bar = (1.0 / np1) * state.theta +
                    (static_cast<double>(state.n) / np1) * state.theta_bar;
  if (weight != 0.0) state.theta.noalias() += (gamma * weight) * sample.x;
  ++state.n;
}

// ---------------------------------------------------------------------------

const Sample* SpanSource::next() {
  const std::size_t limit = use_order_ ? order_.size() : samples_.size();
  if (pos_ >= limit) return nullptr;
  const std::size_t i = use_order_ ? order_[pos_] : pos_;
  ++pos_;
  return &samples_[i];
}

const Sample* GeneratorSource::next() {
  current_ = generator_->next();
  return &current_;
}

Checkpoint ErrorMetric::score(std::uint64_t n, const SgdState& state) const {
  const Vector avg = state.theta_bar - theta_star;
  const Vector last = state.theta - theta_star;
  Checkpoint c;
  c.n = n;
  c.err_h = std::max(0.0, avg.dot(h * avg));
  c.err_2 = avg.squaredNorm();
  c.err_last_h = std::max(0.0, last.dot(h * last));
  return c;
}

RunRecord run(SampleSource& source, const RunConfig& config, const ErrorMetric& metric,
              RunTrace* trace) {
  if (config.n_steps == 0) throw std::invalid_argument("run: n_steps must be >= 1");
  validate_plan(config.checkpoints, config.n_steps);
  if (config.theta0.size() != metric.theta_star.size()) {
    throw std::invalid_argument("run: theta0 dimension mismatch");
  }

  SgdState state = SgdState::start(config.theta0, config.loss);
  RunRecord record;
  record.seed = config.seed;
  record.config_digest = config.config_digest;
  record.checkpoints.reserve(config.checkpoints.size());
  if (trace && trace->record_iterates) {
    trace->iterates.clear();
    trace->iterates.push_back(state.theta);
  }

  std::size_t next_cp = 0;
  for (std::uint64_t k = 1; k <= config.n_steps; ++k) {
    const Sample* sample = source.next();
    if (sample == nullptr) throw std::runtime_error(exhausted_message(k - 1, config.n_steps));
    sgd_step(state, *sample, config.schedule);
    if (trace && trace->record_iterates) trace->iterates.push_back(state.theta);
    if (next_cp < config.checkpoints.size() && config.checkpoints[next_cp] == k) {
      record.checkpoints.push_back(metric.score(k, state));
      ++next_cp;
    }
  }
  if (trace) trace->final_state = std::move(state);
  return record;
}

RunRecord oracle_ls_run(SampleSource& source, double gamma0, std::uint64_t n_steps,
                        const std::vector<std::uint64_t>& checkpoints,
                        const Vector& theta0, const ErrorMetric& metric,
                        std::uint64_t seed, std::string config_digest, RunTrace* trace) {
  if (n_steps == 0) throw std::invalid_argument("oracle_ls_run: n_steps must be >= 1");
  validate_plan(checkpoints, n_steps);
  const StepSchedule schedule = StepSchedule::constant(gamma0);

  SgdState state = SgdState::start(theta0, L2Loss{});
  RunRecord record;
  record.seed = seed;
  record.config_digest = std::move(config_digest);
  if (trace && trace->record_iterates) {
    trace->iterates.clear();
    trace->iterates.push_back(state.theta);
  }

  std::size_t next_cp = 0;
  for (std::uint64_t k = 1; k <= n_steps; ++k) {
    const Sample* sample = source.next();
    if (sample == nullptr) throw std::runtime_error(exhausted_message(k - 1, n_steps));
    if (!sample->corrupted) {
      sgd_step(state, *sample, schedule);
      if (trace && trace->record_iterates) trace->iterates.push_back(state.theta);
    }
    if (next_cp < checkpoints.size() && checkpoints[next_cp] == k) {
      record.checkpoints.push_back(metric.score(k, state));
      ++next_cp;
    }
  }
  if (state.n == 0) {
    throw std::invalid_argument("oracle_ls_run: every sample in the stream is corrupted");
  }
  if (trace) trace->final_state = std::move(state);
  return record;
}

std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_steps, double ratio) {
  if (n_steps == 0) throw std::invalid_argument("checkpoints: n_steps must be >= 1");
  if (!(ratio > 1.0)) throw std::invalid_argument("checkpoints: ratio must be > 1");
  std::vector<std::uint64_t> out;
  for (int k = 0;; ++k) {
    const double v = std::ceil(std::pow(ratio, k));
    if (v > static_cast<double>(n_steps)) break;
    const auto n = static_cast<std::uint64_t>(v);
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  if (out.back() != n_steps) out.push_back(n_steps);
  return out;
}

double default_gamma0(const Covariance& covariance) { return 1.0 / covariance.r2; }

// ---------------------------------------------------------------------------

void write_run_record(std::ostream& out, const RunRecord& record) {
  out << "# config_digest=" << record.config_digest << '\n';
  out << "# seed=" << record.seed << '\n';
  out << "n,err_H,err_2,err_last_H\n";
  for (const auto& c : record.checkpoints) {
    out << c.n << ',' << format_double(c.err_h) << ',' << format_double(c.err_2) << ','
        << format_double(c.err_last_h) << '\n';
  }
}

RunRecord read_run_record(std::istream& in) {
  RunRecord record;
  std::string line;
  bool header_seen = false;
  auto parse_double = [](std::string_view field) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
      throw std::runtime_error("run record: bad number '" + std::string(field) + "'");
    }
    return v;
  };
  auto parse_u64 = [](std::string_view field) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
      throw std::runtime_error("run record: bad integer '" + std::string(field) + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      while (!key.empty() && key.front() == ' ') key.erase(key.begin());
      const std::string value = line.substr(eq + 1);
      if (key == "config_digest") record.config_digest = value;
      else if (key == "seed") record.seed = parse_u64(value);
      continue;
    }
    if (!header_seen) {
      if (line != "n,err_H,err_2,err_last_H") {
        throw std::runtime_error("run record: unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    std::string_view rest(line);
    std::string_view fields[4];
    for (int i = 0; i < 4; ++i) {
      const auto comma = rest.find(',');
      if ((i < 3) == (comma == std::string_view::npos)) {
        throw std::runtime_error("run record: expected 4 fields in '" + line + "'");
      }
      fields[i] = rest.substr(0, comma);
      rest = i < 3 ? rest.substr(comma + 1) : std::string_view{};
    }
    record.checkpoints.push_back({parse_u64(fields[0]), parse_double(fields[1]),
                                  parse_double(fields[2]), parse_double(fields[3])});
  }
  record.validate();
  return record;
}

}  // namespace streamrobust

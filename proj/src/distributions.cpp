#include "pdgsbr/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pdgsbr/errors.hpp"

namespace pdgsbr {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();
constexpr double kHuge = std::numeric_limits<double>::max();

// log of a Gamma(shape, 1) variate. Shapes below one use the boost
// G(shape) = G(shape + 1) * U^(1/shape), carried out in log space because
// for shape ~ 1e-3 the variate itself is routinely below the double range.
double log_gamma_variate(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double boosted = log_gamma_variate(shape + 1.0, rng);
    return boosted + std::log(rng.uniform()) / shape;
  }
  // Marsaglia & Tsang (2000).
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return std::log(d) + std::log(v);
    }
  }
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << name << " must be positive and finite, got " << value;
    throw ParameterDomainError(msg.str());
  }
}

}  // namespace

double Rng::uniform() {
  // (k + 0.5) / 2^53 lies strictly inside (0, 1).
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream out;
  out << seed_ << ' ' << engine_;
  return out.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream in(state);
  std::uint64_t seed = 0;
  std::mt19937_64 engine;
  in >> seed >> engine;
  if (in.fail()) throw ParameterDomainError("malformed RNG state string");
  seed_ = seed;
  engine_ = engine;
}

double UnnormalizedLogDensity::operator()(double x) const {
  if (!support.contains(x)) return -std::numeric_limits<double>::infinity();
  return evaluator(x);
}

double draw_gamma(double shape, double rate, Rng& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  const double log_x = log_gamma_variate(shape, rng) - std::log(rate);
  return std::clamp(std::exp(log_x), kTiny, kHuge);
}

double draw_beta(double a, double b, Rng& rng) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  const double lx = log_gamma_variate(a, rng);
  const double ly = log_gamma_variate(b, rng);
  // x / (x + y) = 1 / (1 + exp(ly - lx))
  const double value = 1.0 / (1.0 + std::exp(ly - lx));
  return std::clamp(value, kTiny, std::nextafter(1.0, 0.0));
}

std::vector<double> draw_dirichlet(std::span<const double> alpha, Rng& rng) {
  if (alpha.empty()) throw ParameterDomainError("dirichlet needs at least one component");
  for (double a : alpha) require_positive(a, "dirichlet alpha");
  if (alpha.size() == 1) return {1.0};

  std::vector<double> logs(alpha.size());
  for (std::size_t l = 0; l < alpha.size(); ++l) logs[l] = log_gamma_variate(alpha[l], rng);
  const double top = *std::max_element(logs.begin(), logs.end());
  double total = 0.0;
  for (double& v : logs) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : logs) v = std::max(v / total, kTiny);
  return logs;
}

double draw_normal(double mean, double sd, Rng& rng) { return mean + sd * rng.normal(); }

std::size_t draw_categorical(std::span<const double> weights, Rng& rng) {
  if (weights.empty()) throw DegenerateWeightsError("categorical needs at least one weight");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DegenerateWeightsError("categorical weights must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw DegenerateWeightsError("categorical weights sum to zero");
  if (weights.size() == 1) return 0;

  const double target = rng.uniform() * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    cumulative += weights[k];
    last_positive = k;
    if (target < cumulative) return k;
  }
  return last_positive;
}

std::size_t draw_categorical_log(std::span<const double> log_weights, Rng& rng) {
  if (log_weights.empty()) throw DegenerateWeightsError("categorical needs at least one weight");
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw DegenerateWeightsError("log weights must be finite or -inf");
    }
    top = std::max(top, lw);
  }
  if (top == -std::numeric_limits<double>::infinity()) {
    throw DegenerateWeightsError("all log weights are -inf");
  }
  std::vector<double> weights(log_weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) weights[k] = std::exp(log_weights[k] - top);
  return draw_categorical(weights, rng);
}

std::int64_t draw_truncated_geometric(double lambda, std::int64_t min_value, Rng& rng) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw ParameterDomainError("geometric probability must lie in (0, 1)");
  }
  if (min_value < 1) throw ParameterDomainError("truncated geometric min_value must be >= 1");
  // P{N - min >= k} = (1 - lambda)^k, inverted in closed form.
  const double excess = std::floor(std::log(rng.uniform()) / std::log1p(-lambda));
  if (excess >= 9.0e15) throw InvalidStateError("truncated geometric draw overflows");
  return min_value + static_cast<std::int64_t>(excess);
}

double slice_sample_1d(const UnnormalizedLogDensity& target, double current, double width,
                       int max_stepout, Rng& rng) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ParameterDomainError("slice width must be positive");
  }
  if (!(target.support.lo < target.support.hi)) {
    throw ParameterDomainError("slice support must satisfy lo < hi");
  }
  const double log_current = target(current);
  if (!std::isfinite(log_current)) {
    throw InvalidStateError("slice sampler started at a point with non-finite log density");
  }
  const double level = log_current + std::log(rng.uniform());

  double left = current - width * rng.uniform();
  double right = left + width;
  const int steps = std::max(max_stepout, 0);
  int left_steps = static_cast<int>(std::floor(steps * rng.uniform()));
  int right_steps = std::max(steps - 1 - left_steps, 0);
  left = std::max(left, target.support.lo);
  right = std::min(right, target.support.hi);
  while (left_steps-- > 0 && left > target.support.lo && target(left) > level) {
    left = std::max(left - width, target.support.lo);
  }
  while (right_steps-- > 0 && right < target.support.hi && target(right) > level) {
    right = std::min(right + width, target.support.hi);
  }

  for (;;) {
    const double proposal = left + rng.uniform() * (right - left);
    if (target(proposal) > level) return proposal;
    if (proposal < current) {
      left = proposal;
    } else if (proposal > current) {
      right = proposal;
    } else {
      return current;
    }
  }
}

}  // namespace pdgsbr

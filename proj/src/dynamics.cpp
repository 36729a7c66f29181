#include "pdgsbr/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pdgsbr/errors.hpp"

namespace pdgsbr {

std::vector<double> PolynomialMap::padded(std::size_t degree) const {
  std::vector<double> out(degree + 1, 0.0);
  for (std::size_t r = 0; r < out.size() && r < coefficients.size(); ++r) out[r] = coefficients[r];
  return out;
}

double eval_map(const PolynomialMap& map, double x) {
  double acc = 0.0;
  for (auto it = map.coefficients.rbegin(); it != map.coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

PolynomialMap quadratic_map(double q) { return {{1.0, 0.0, -q}}; }

PolynomialMap cubic_map(double c) { return {{0.05, c, 0.0, -0.99}}; }

NoiseMixtureSpec NoiseMixtureSpec::make(std::vector<double> weights, std::vector<double> variances) {
  if (weights.empty() || weights.size() != variances.size()) {
    throw ConfigError("noise mixture needs matching, non-empty weight and variance lists");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("noise weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "noise weights must sum to 1, got " << total;
    throw ConfigError(msg.str());
  }
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("noise variances must be positive");
  }
  NoiseMixtureSpec spec;
  spec.weights_ = std::move(weights);
  spec.variances_ = std::move(variances);
  return spec;
}

double NoiseMixtureSpec::variance() const {
  double v = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) v += weights_[c] * variances_[c];
  return v;
}

double NoiseMixtureSpec::density(double z) const {
  double f = 0.0;
  for (std::size_t c = 0; c < weights_.size(); ++c) {
    f += weights_[c] * std::exp(-0.5 * z * z / variances_[c]) /
         std::sqrt(2.0 * std::numbers::pi * variances_[c]);
  }
  return f;
}

double sample_noise(const NoiseMixtureSpec& spec, Rng& rng) {
  const std::size_t c = draw_categorical(spec.weights(), rng);
  return std::sqrt(spec.variances()[c]) * rng.normal();
}

bool MultiSeries::has_truth() const {
  for (const auto& s : series) {
    if (!s.truth) return false;
  }
  return !series.empty();
}

void MultiSeries::validate() const {
  if (series.empty()) throw ConfigError("data must contain at least one series");
  for (std::size_t j = 0; j < series.size(); ++j) {
    if (series[j].n() < 2) {
      throw ConfigError("series " + std::to_string(j + 1) + " needs at least 2 observations");
    }
    for (double x : series[j].observations) {
      if (!std::isfinite(x)) {
        throw ConfigError("series " + std::to_string(j + 1) + " has a non-finite observation");
      }
    }
  }
}

namespace {

// Fills `out` with up to `count` iterates; returns the index of the first
// diverging value, if any (that value is not stored).
std::optional<std::size_t> iterate(const PolynomialMap& map, const NoiseMixtureSpec& noise,
                                   double x0, std::size_t count, Rng& rng, std::vector<double>& out) {
  out.clear();
  out.reserve(count);
  double x = x0;
  for (std::size_t i = 0; i < count; ++i) {
    x = eval_map(map, x) + sample_noise(noise, rng);
    if (!std::isfinite(x) || std::abs(x) > kDivergenceBound) return i;
    out.push_back(x);
  }
  return std::nullopt;
}

}  // namespace

SimulatedSeries simulate_series(const PolynomialMap& map, const NoiseMixtureSpec& noise,
                                std::size_t n, double x0, std::size_t horizon, Rng& rng) {
  if (n < 1) throw ParameterDomainError("simulate_series needs n >= 1");
  std::vector<double> path;
  if (auto bad = iterate(map, noise, x0, n + horizon, rng, path)) {
    throw DivergenceError(0, *bad,
                          "trajectory diverged at index " + std::to_string(*bad));
  }
  SimulatedSeries out;
  out.observations.assign(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(n));
  out.held_out.assign(path.begin() + static_cast<std::ptrdiff_t>(n), path.end());
  return out;
}

NoiseMixtureSpec compound_noise(const std::vector<NoiseTerm>& terms) {
  std::vector<double> weights;
  std::vector<double> variances;
  for (const auto& term : terms) {
    if (term.selection <= 0.0) continue;
    if (!term.component) throw ConfigError("noise term without a component");
    for (std::size_t c = 0; c < term.component->weights().size(); ++c) {
      weights.push_back(term.selection * term.component->weights()[c]);
      variances.push_back(term.component->variances()[c]);
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("selection weights of a series must sum to 1");
  // Renormalize away round-off so make() sees an exact probability vector.
  for (double& w : weights) w /= total;
  return NoiseMixtureSpec::make(std::move(weights), std::move(variances));
}

MultiSeries simulate_multi(const std::vector<SeriesSpec>& specs, Rng& rng,
                           const SimulateOptions& options) {
  if (specs.empty()) throw ConfigError("simulate_multi needs at least one series spec");
  MultiSeries data;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& spec = specs[j];
    if (spec.n < 1) throw ConfigError("series " + std::to_string(j + 1) + " needs n >= 1");
    const NoiseMixtureSpec noise = compound_noise(spec.noise);
    std::vector<double> path;
    const auto bad = iterate(spec.map, noise, spec.x0, spec.n + spec.horizon, rng, path);
    if (bad && !options.keep_escaped_prefix) {
      throw DivergenceError(j, *bad,
                            "series " + std::to_string(j + 1) + " diverged at index " +
                                std::to_string(*bad) + "; try another data seed or --allow-escape");
    }
    Series series;
    const std::size_t n = std::min(spec.n, path.size());
    series.observations.assign(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(n));
    series.held_out.assign(path.begin() + static_cast<std::ptrdiff_t>(n), path.end());
    series.truth = SeriesTruth{spec.map, noise, spec.x0};
    data.series.push_back(std::move(series));
  }
  return data;
}

EscapeReport detect_escape(const std::vector<double>& series, double bound) {
  if (!(bound > 0.0)) throw ParameterDomainError("escape bound must be positive");
  EscapeReport report;
  report.bound = bound;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (std::abs(series[i]) > bound) {
      report.escaped = true;
      report.escape_index = i;
      break;
    }
  }
  return report;
}

}  // namespace pdgsbr

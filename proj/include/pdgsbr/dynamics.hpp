#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "pdgsbr/distributions.hpp"

namespace pdgsbr {

/// g(theta, x) = sum_r theta_r x^r.
struct PolynomialMap {
  std::vector<double> coefficients;

  std::size_t degree() const { return coefficients.empty() ? 0 : coefficients.size() - 1; }
  /// Coefficients zero-padded (or truncated) to `degree + 1` entries.
  std::vector<double> padded(std::size_t degree) const;
};

double eval_map(const PolynomialMap& map, double x);

/// Q(x) = 1 - q x^2.
PolynomialMap quadratic_map(double q);
/// C(x) = 0.05 + c x - 0.99 x^3.
PolynomialMap cubic_map(double c);

/// Finite mixture of zero-mean Gaussians. Construct through make() so the
/// invariants (weights sum to one, variances positive) always hold.
class NoiseMixtureSpec {
 public:
  static NoiseMixtureSpec make(std::vector<double> weights, std::vector<double> variances);

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& variances() const { return variances_; }
  double variance() const;
  double density(double z) const;

 private:
  NoiseMixtureSpec() = default;
  std::vector<double> weights_;
  std::vector<double> variances_;
};

double sample_noise(const NoiseMixtureSpec& spec, Rng& rng);

struct SeriesTruth {
  PolynomialMap map;
  NoiseMixtureSpec noise;
  double x0 = 0.0;
};

struct Series {
  std::vector<double> observations;  // x_{j,1..n_j}
  std::vector<double> held_out;      // true x_{j,n_j+1..}
  std::optional<SeriesTruth> truth;

  std::size_t n() const { return observations.size(); }
};

struct MultiSeries {
  std::vector<Series> series;

  std::size_t m() const { return series.size(); }
  bool has_truth() const;
  /// Throws ConfigError unless n_j >= 2 and every observation is finite.
  void validate() const;
};

struct SimulatedSeries {
  std::vector<double> observations;
  std::vector<double> held_out;
};

/// Iterates x_i = g(x_{i-1}) + z_i for n observations followed by `horizon`
/// held-out values from the same stream. Throws DivergenceError once a value
/// is non-finite or exceeds kDivergenceBound in magnitude.
SimulatedSeries simulate_series(const PolynomialMap& map, const NoiseMixtureSpec& noise,
                                std::size_t n, double x0, std::size_t horizon, Rng& rng);

inline constexpr double kDivergenceBound = 1e12;

/// One weighted term p_{jl} M_{jl} of a series' noise. Components are shared
/// by pointer so a pair's M_{jl} is literally one object for both series.
struct NoiseTerm {
  double selection = 1.0;
  std::shared_ptr<const NoiseMixtureSpec> component;
};

struct SeriesSpec {
  PolynomialMap map;
  std::vector<NoiseTerm> noise;
  std::size_t n = 0;
  double x0 = 0.0;
  std::size_t horizon = 0;
};

/// Flattens sum_l p_l M_l into one mixture (drops zero-selection terms).
NoiseMixtureSpec compound_noise(const std::vector<NoiseTerm>& terms);

struct SimulateOptions {
  /// Keep the finite prefix of a diverging series instead of throwing.
  bool keep_escaped_prefix = false;
};

MultiSeries simulate_multi(const std::vector<SeriesSpec>& specs, Rng& rng,
                           const SimulateOptions& options = {});

struct EscapeReport {
  bool escaped = false;
  std::optional<std::size_t> escape_index;
  double bound = 0.0;
};

EscapeReport detect_escape(const std::vector<double>& series, double bound);

}  // namespace pdgsbr

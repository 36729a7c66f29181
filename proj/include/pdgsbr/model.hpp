#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pdgsbr/distributions.hpp"
#include "pdgsbr/dynamics.hpp"

namespace pdgsbr {

/// All hyperparameters of the hierarchical model. The polynomial coefficients
/// and initial conditions carry flat priors (the latter on x0_support).
struct PriorConfig {
  std::size_t m = 1;
  std::size_t poly_degree = 5;
  Eigen::MatrixXd dirichlet_alpha;  // row j = alpha_j
  Eigen::MatrixXd beta_a;           // symmetric
  Eigen::MatrixXd beta_b;           // symmetric
  double gamma_a = 1e-3;
  double gamma_b = 1e-3;
  std::vector<std::size_t> horizon;   // T_j
  std::vector<Interval> x0_support;

  /// Defaults used throughout the numerical experiments: a_{jl} = b_{jl} =
  /// 0.5, a = b = 1e-3, quintic model, T_j = 1, x0 in [-5, 5].
  static PriorConfig defaults(std::size_t m, const Eigen::MatrixXd& dirichlet_alpha);

  /// Throws ConfigError on any violated invariant.
  void validate() const;
};

/// Precisions tau_{jlk} of the shared measures G_{jl}, one growable sequence
/// per unordered pair. (j, l) and (l, j) address the same storage.
class AtomTable {
 public:
  AtomTable() = default;
  explicit AtomTable(std::size_t m);

  std::size_t m() const { return m_; }
  std::size_t pair_count() const { return pairs_.size(); }
  static std::size_t pair_index(std::size_t j, std::size_t l, std::size_t m);

  std::vector<double>& atoms(std::size_t j, std::size_t l) { return pairs_[pair_index(j, l, m_)]; }
  const std::vector<double>& atoms(std::size_t j, std::size_t l) const {
    return pairs_[pair_index(j, l, m_)];
  }
  /// k is one-based, as in tau_{jlk}.
  double tau(std::size_t j, std::size_t l, std::size_t k) const { return atoms(j, l)[k - 1]; }
  std::size_t size(std::size_t j, std::size_t l) const { return atoms(j, l).size(); }

  std::vector<std::vector<double>>& raw() { return pairs_; }
  const std::vector<std::vector<double>>& raw() const { return pairs_; }

  bool operator==(const AtomTable&) const = default;

 private:
  std::size_t m_ = 0;
  std::vector<std::vector<double>> pairs_;
};

/// Latent allocations of one series over i = 1..n_j + T_j (stored zero-based
/// by i - 1). delta is a zero-based series index; d and N are one-based
/// counts with 1 <= d <= N.
struct SeriesAllocations {
  std::vector<int> delta;
  std::vector<std::int64_t> d;
  std::vector<std::int64_t> N;

  bool operator==(const SeriesAllocations&) const = default;
};

struct ChainState {
  AtomTable atoms;
  std::vector<SeriesAllocations> alloc;
  Eigen::MatrixXd p;       // row-stochastic selection probabilities
  Eigen::MatrixXd lambda;  // symmetric geometric probabilities
  std::vector<Eigen::VectorXd> theta;
  std::vector<double> x0;
  std::vector<std::vector<double>> future;
  std::uint64_t iteration = 0;
  /// Set for the common-precision Gaussian sampler; replaces the atoms.
  std::optional<double> common_precision;
  /// Series whose least-squares initialization was singular (theta = 0).
  std::vector<bool> ols_fallback;

  std::size_t m() const { return theta.size(); }
  std::int64_t max_slice() const;  // N* = max_{j,i} N_{ji}

  bool operator==(const ChainState& other) const;
};

/// x_{j,i} along the augmented path: i = 0 is x_{j0}, 1..n_j observed,
/// beyond n_j the latent futures.
double path_value(const Series& series, const ChainState& state, std::size_t j, std::size_t i);

/// Precision attached to x_{ji} (i >= 1): the allocated atom, or the common
/// precision when the state belongs to the parametric sampler.
double point_precision(const ChainState& state, std::size_t j, std::size_t i);

/// Throws InvalidStateError naming the first violated ChainState invariant.
void check_invariants(const ChainState& state, const MultiSeries& data, const PriorConfig& prior);

/// (1, x, ..., x^degree).
Eigen::VectorXd monomials(double x, std::size_t degree);
/// g_j(theta, x) by Horner's rule.
double eval_theta(const Eigen::VectorXd& theta, double x);

/// Atoms seeded per pair by init_atoms.
inline constexpr std::size_t kInitAtoms = 8;

/// p rows from their Dirichlet priors, lambda from its beta prior, delta from
/// p_j; then init_paths and init_atoms.
ChainState init_chain(const MultiSeries& data, const PriorConfig& prior, Rng& rng);

/// Seeds pair (j, l) with kInitAtoms precisions at evenly spaced quantiles of
/// the pooled squared starting residuals of series j and l, sets N = kInitAtoms
/// and d to the atom nearest each point's own residual on the log scale.
void init_atoms(ChainState& state, const MultiSeries& data);

/// Deterministic starting values shared by every sampler: theta_j by least
/// squares of x_{ji} on the monomials of x_{j,i-1} (zero, flagged, when the
/// design is rank deficient), x_{j0} = x_{j1} clipped to its support, and
/// futures by iterating the fitted map from x_{j,n_j}.
void init_paths(ChainState& state, const MultiSeries& data, const PriorConfig& prior);

/// Grows every pair to at least N* atoms with fresh Gamma(a, b) draws.
void ensure_atoms(ChainState& state, const PriorConfig& prior, Rng& rng);

/// (pi_1, ..., pi_K, tail) with pi_k = lambda (1 - lambda)^(k - 1) and
/// tail = (1 - lambda)^K.
std::vector<double> geometric_weights(double lambda, std::size_t K);

/// One retained sweep.
struct TraceRecord {
  std::uint64_t iteration = 0;
  std::vector<Eigen::VectorXd> theta;
  Eigen::MatrixXd p;       // empty for the parametric sampler
  Eigen::MatrixXd lambda;  // empty for the parametric sampler
  std::vector<double> x0;
  std::vector<std::vector<double>> future;
  std::vector<double> noise;              // Z_{j, n_j + 1}
  std::vector<std::size_t> atom_counts;   // K_{jl} for j <= l, row-major
  std::optional<double> common_precision;

  bool operator==(const TraceRecord& other) const;
};

TraceRecord make_record(const ChainState& state, std::vector<double> noise);

}  // namespace pdgsbr

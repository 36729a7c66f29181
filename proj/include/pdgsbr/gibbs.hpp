#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdgsbr/distributions.hpp"
#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/model.hpp"

namespace pdgsbr {

enum class SamplerKind { pdgsbr, gsbr, parametric };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

struct GibbsConfig {
  std::uint64_t total_iterations = 10000;
  std::uint64_t burn_in = 5000;
  std::uint64_t thin = 1;
  std::uint64_t seed = 1;
  double slice_width = 0.25;
  int max_stepout = 16;
  /// Sweeps between checkpoints; 0 disables them.
  std::uint64_t checkpoint_interval = 0;
  SamplerKind kind = SamplerKind::pdgsbr;

  void validate() const;
};

/// h = (x_{ji} - g_j(theta_j, x_{j,i-1}))^2 for i >= 1.
struct ResidualStat {
  std::size_t series = 0;
  std::size_t index = 0;
  double value = 0.0;
};

/// Squared one-step residuals of series j over i = 1..n_j + T_j.
std::vector<ResidualStat> residuals(const ChainState& state, const MultiSeries& data,
                                    std::size_t j);

struct GammaParams {
  double shape = 0.0;
  double rate = 0.0;
};

struct BetaParams {
  double a = 0.0;
  double b = 0.0;
};

// Posterior parameters of the conjugate kernels, exposed so the kernels can be
// audited against independent computations.

/// Indexed [pair_index(j, l)][k - 1] for k = 1..K_{jl}.
std::vector<std::vector<GammaParams>> precision_posterior(const ChainState& state,
                                                          const MultiSeries& data,
                                                          const PriorConfig& prior);
Eigen::VectorXd selection_posterior(const ChainState& state, const PriorConfig& prior, std::size_t j);
BetaParams geometric_posterior(const ChainState& state, const PriorConfig& prior, std::size_t j,
                               std::size_t l);
GammaParams common_precision_posterior(const ChainState& state, const MultiSeries& data,
                                       const PriorConfig& prior);

struct ThetaConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
};
/// Gaussian full conditional of theta_j under the flat prior. Throws
/// SingularDesignError when the precision matrix condition number exceeds 1e12.
ThetaConditional theta_conditional(const ChainState& state, const MultiSeries& data,
                                   const PriorConfig& prior, std::size_t j);

/// Unnormalized log weights of the (d, delta) block for point (j, i), laid
/// out as [l * N_{ji} + (k - 1)].
std::vector<double> block_log_weights(const ChainState& state, const MultiSeries& data,
                                      std::size_t j, std::size_t i);

UnnormalizedLogDensity x0_target(const ChainState& state, const MultiSeries& data,
                                 const PriorConfig& prior, std::size_t j);
/// Two-factor target of interior future x_{j, n_j + k}, 1 <= k < T_j.
UnnormalizedLogDensity future_target(const ChainState& state, const MultiSeries& data,
                                     std::size_t j, std::size_t k);

/// Support used for slice moves of interior out-of-sample points.
inline constexpr Interval kFutureSupport{-1e8, 1e8};

/// Largest slice bound allowed before the chain is declared numerically broken.
inline constexpr std::int64_t kMaxSliceBound = 10'000'000;

void update_precisions(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng);
void update_alloc_block(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng);
void update_slice_N(ChainState& state, const PriorConfig& prior, Rng& rng);
void update_selection_probs(ChainState& state, const PriorConfig& prior, Rng& rng);
void update_geometric_probs(ChainState& state, const PriorConfig& prior, Rng& rng);
void update_theta(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng);
void update_x0(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
               const GibbsConfig& config, Rng& rng);
void update_future(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                   const GibbsConfig& config, Rng& rng);
std::vector<double> sample_noise_predictive(const ChainState& state, const PriorConfig& prior, Rng& rng);

/// Common-precision update of the parametric Gaussian baseline.
void update_common_precision(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                             Rng& rng);

/// One full PD-GSBR scan; returns the noise-predictive draws.
std::vector<double> sweep(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                          const GibbsConfig& config, Rng& rng);
/// Single-series GSBR scan (m = 1, no selection layer).
std::vector<double> gsbr_sweep(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                               const GibbsConfig& config, Rng& rng);
std::vector<double> parametric_sweep(ChainState& state, const MultiSeries& data,
                                     const PriorConfig& prior, const GibbsConfig& config, Rng& rng);

ChainState init_parametric(const MultiSeries& data, const PriorConfig& prior, Rng& rng);

/// Everything needed to continue a chain bit-exactly.
struct Checkpoint {
  ChainState state;
  std::string rng_state;
  SamplerKind kind = SamplerKind::pdgsbr;
};

struct ChainHooks {
  std::function<void(const TraceRecord&)> on_record;
  /// Called every checkpoint_interval sweeps and after the final sweep.
  std::function<void(const Checkpoint&)> on_checkpoint;
  /// Receives one status line per 1000 sweeps.
  std::ostream* progress = nullptr;
};

/// Runs config.total_iterations sweeps of the sampler selected by config.kind,
/// keeping every thin-th sweep after burn-in. When `resume` is given the chain
/// continues from it. Kernel failures surface as KernelError.
std::vector<TraceRecord> run_chain(const MultiSeries& data, const PriorConfig& prior,
                                   const GibbsConfig& config, const ChainHooks& hooks = {},
                                   const Checkpoint* resume = nullptr);

/// run_chain with kind forced to the common-precision Gaussian sampler.
std::vector<TraceRecord> run_parametric_gaussian(const MultiSeries& data, const PriorConfig& prior,
                                                 const GibbsConfig& config,
                                                 const ChainHooks& hooks = {});

// Density evaluations used as model oracles.

/// Augmented joint of x_{ji} with N = r, d = k, delta = l given the rest.
double augmented_joint_density(const ChainState& state, const MultiSeries& data, std::size_t j,
                               std::size_t i, std::int64_t r, std::size_t k, std::size_t l);

/// Noise density f_j(z) = sum_l p_{jl} sum_{k <= K} pi_{jlk} N(z | 0, 1/tau_{jlk})
/// plus, for each l, the tail mass (1 - lambda_{jl})^K placed on tail_precision[l].
double noise_mixture_density(const ChainState& state, std::size_t j, double z, std::size_t K,
                             std::span<const double> tail_precision);

}  // namespace pdgsbr

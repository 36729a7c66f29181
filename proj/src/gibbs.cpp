#include "pdgsbr/gibbs.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "pdgsbr/errors.hpp"

namespace pdgsbr {

namespace {

std::size_t path_length(const MultiSeries& data, const PriorConfig& prior, std::size_t j) {
  return data.series[j].n() + prior.horizon[j];
}

double squared_residual(const ChainState& state, const MultiSeries& data, std::size_t j,
                        std::size_t i) {
  const Series& s = data.series[j];
  const double e = path_value(s, state, j, i) - eval_theta(state.theta[j], path_value(s, state, j, i - 1));
  return e * e;
}

double log_normal_density(double x, double mean, double precision) {
  const double e = x - mean;
  return 0.5 * std::log(precision) - 0.5 * precision * e * e - 0.5 * std::log(2.0 * std::numbers::pi);
}

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::pdgsbr: return "pdgsbr";
    case SamplerKind::gsbr: return "gsbr";
    case SamplerKind::parametric: return "parametric";
  }
  return "pdgsbr";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "pdgsbr") return SamplerKind::pdgsbr;
  if (name == "gsbr") return SamplerKind::gsbr;
  if (name == "parametric") return SamplerKind::parametric;
  throw ConfigError("unknown sampler '" + name + "' (expected pdgsbr, gsbr or parametric)");
}

void GibbsConfig::validate() const {
  if (!(total_iterations > burn_in)) throw ConfigError("sampler: iterations must exceed burn_in");
  if (thin < 1) throw ConfigError("sampler: thin must be >= 1");
  if (!(slice_width > 0.0)) throw ConfigError("sampler: slice_width must be positive");
  if (max_stepout < 0) throw ConfigError("sampler: max_stepout must be >= 0");
}

std::vector<ResidualStat> residuals(const ChainState& state, const MultiSeries& data, std::size_t j) {
  const std::size_t len = data.series[j].n() + state.future[j].size();
  std::vector<ResidualStat> out;
  out.reserve(len);
  for (std::size_t i = 1; i <= len; ++i) out.push_back({j, i, squared_residual(state, data, j, i)});
  return out;
}

// ---------------------------------------------------------------------------
// Precisions

std::vector<std::vector<GammaParams>> precision_posterior(const ChainState& state,
                                                          const MultiSeries& data,
                                                          const PriorConfig& prior) {
  const std::size_t m = data.m();
  std::vector<std::vector<GammaParams>> post(state.atoms.pair_count());
  for (std::size_t pi = 0; pi < post.size(); ++pi) {
    post[pi].assign(state.atoms.raw()[pi].size(), GammaParams{prior.gamma_a, prior.gamma_b});
  }
  // Every allocation (j, i) with delta = l, d = k feeds tau_{jlk}; for j != l
  // both series of the pair land in the same unordered-pair slot.
  for (std::size_t j = 0; j < m; ++j) {
    const auto& a = state.alloc[j];
    for (std::size_t i = 1; i <= a.delta.size(); ++i) {
      const auto l = static_cast<std::size_t>(a.delta[i - 1]);
      const auto k = static_cast<std::size_t>(a.d[i - 1]);
      auto& cell = post[AtomTable::pair_index(j, l, m)][k - 1];
      cell.shape += 0.5;
      cell.rate += 0.5 * squared_residual(state, data, j, i);
    }
  }
  return post;
}

void update_precisions(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng) {
  const auto post = precision_posterior(state, data, prior);
  for (std::size_t pi = 0; pi < post.size(); ++pi) {
    auto& seq = state.atoms.raw()[pi];
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const GammaParams& g = post[pi][k];
      if (!(g.shape > 0.0) || !(g.rate > 0.0) || !std::isfinite(g.rate)) {
        throw InvalidStateError("precision update produced a non-positive gamma parameter");
      }
      seq[k] = draw_gamma(g.shape, g.rate, rng);
    }
  }
}

// ---------------------------------------------------------------------------
// Allocation block (d, delta) and slice bounds N

std::vector<double> block_log_weights(const ChainState& state, const MultiSeries& data, std::size_t j,
                                      std::size_t i) {
  const std::size_t m = data.m();
  const auto& a = state.alloc[j];
  const std::int64_t N = a.N[i - 1];
  const double h = squared_residual(state, data, j, i);
  std::vector<double> logw(m * static_cast<std::size_t>(N));
  for (std::size_t l = 0; l < m; ++l) {
    const double lam = state.lambda(idx(j), idx(l));
    // p_{jl} lambda^2 (1 - lambda)^(N - 1): the factors of the augmented joint
    // that depend on the candidate measure l.
    const double base = std::log(state.p(idx(j), idx(l))) + 2.0 * std::log(lam) +
                        static_cast<double>(N - 1) * std::log1p(-lam);
    const auto& taus = state.atoms.atoms(j, l);
    for (std::int64_t k = 0; k < N; ++k) {
      const double tau = taus[static_cast<std::size_t>(k)];
      logw[l * static_cast<std::size_t>(N) + static_cast<std::size_t>(k)] =
          base + 0.5 * std::log(tau) - 0.5 * tau * h;
    }
  }
  return logw;
}

void update_alloc_block(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng) {
  for (std::size_t j = 0; j < data.m(); ++j) {
    auto& a = state.alloc[j];
    const std::size_t len = path_length(data, prior, j);
    for (std::size_t i = 1; i <= len; ++i) {
      const auto logw = block_log_weights(state, data, j, i);
      const std::size_t cell = draw_categorical_log(logw, rng);
      const auto N = static_cast<std::size_t>(a.N[i - 1]);
      a.delta[i - 1] = static_cast<int>(cell / N);
      a.d[i - 1] = static_cast<std::int64_t>(cell % N) + 1;
    }
  }
}

void update_slice_N(ChainState& state, const PriorConfig& prior, Rng& rng) {
  for (std::size_t j = 0; j < state.alloc.size(); ++j) {
    auto& a = state.alloc[j];
    for (std::size_t i = 0; i < a.N.size(); ++i) {
      const double lam = state.lambda(idx(j), a.delta[i]);
      const std::int64_t n = draw_truncated_geometric(lam, a.d[i], rng);
      if (n > kMaxSliceBound) {
        throw InvalidStateError("slice bound N exceeded " + std::to_string(kMaxSliceBound) +
                                " (lambda = " + std::to_string(lam) + ")");
      }
      a.N[i] = n;
    }
  }
  // Atoms above N* are unreferenced prior draws; keep only k <= N*.
  const auto n_star = static_cast<std::size_t>(state.max_slice());
  for (auto& seq : state.atoms.raw()) {
    if (seq.size() > n_star) seq.resize(n_star);
  }
  ensure_atoms(state, prior, rng);
}

// ---------------------------------------------------------------------------
// Selection and geometric probabilities

Eigen::VectorXd selection_posterior(const ChainState& state, const PriorConfig& prior, std::size_t j) {
  Eigen::VectorXd alpha = prior.dirichlet_alpha.row(idx(j)).transpose();
  for (int l : state.alloc[j].delta) alpha[l] += 1.0;
  return alpha;
}

void update_selection_probs(ChainState& state, const PriorConfig& prior, Rng& rng) {
  const std::size_t m = state.alloc.size();
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::VectorXd alpha = selection_posterior(state, prior, j);
    const auto row = draw_dirichlet(std::span<const double>(alpha.data(), m), rng);
    for (std::size_t l = 0; l < m; ++l) state.p(idx(j), idx(l)) = row[l];
  }
}

BetaParams geometric_posterior(const ChainState& state, const PriorConfig& prior, std::size_t j,
                               std::size_t l) {
  double count = 0.0;   // S_{jl} (+ S_{lj} off the diagonal)
  double excess = 0.0;  // S'_{jl} (+ S'_{lj})
  auto accumulate = [&](std::size_t from, std::size_t to) {
    const auto& a = state.alloc[from];
    for (std::size_t i = 0; i < a.delta.size(); ++i) {
      if (static_cast<std::size_t>(a.delta[i]) != to) continue;
      count += 1.0;
      excess += static_cast<double>(a.N[i] - 1);
    }
  };
  accumulate(j, l);
  if (j != l) accumulate(l, j);
  return {prior.beta_a(idx(j), idx(l)) + 2.0 * count, prior.beta_b(idx(j), idx(l)) + excess};
}

void update_geometric_probs(ChainState& state, const PriorConfig& prior, Rng& rng) {
  const std::size_t m = state.alloc.size();
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = j; l < m; ++l) {
      const BetaParams post = geometric_posterior(state, prior, j, l);
      const double lam = draw_beta(post.a, post.b, rng);
      state.lambda(idx(j), idx(l)) = lam;
      state.lambda(idx(l), idx(j)) = lam;
    }
  }
}

// ---------------------------------------------------------------------------
// Control parameters, initial conditions, out-of-sample points

ThetaConditional theta_conditional(const ChainState& state, const MultiSeries& data,
                                   const PriorConfig& prior, std::size_t j) {
  const Series& s = data.series[j];
  const auto dim = idx(prior.poly_degree + 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  const std::size_t len = s.n() + state.future[j].size();
  for (std::size_t i = 1; i <= len; ++i) {
    const Eigen::VectorXd v = monomials(path_value(s, state, j, i - 1), prior.poly_degree);
    const double tau = point_precision(state, j, i);
    A.selfadjointView<Eigen::Lower>().rankUpdate(v, tau);
    rhs.noalias() += tau * path_value(s, state, j, i) * v;
  }
  A = A.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || !(hi / lo <= 1e12)) {
    throw SingularDesignError(j, "series " + std::to_string(j + 1) +
                                     ": control-parameter precision matrix is singular "
                                     "(too few distinct states for the polynomial degree)");
  }
  ThetaConditional out;
  out.mean = A.llt().solve(rhs);
  out.precision = std::move(A);
  return out;
}

void update_theta(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng) {
  for (std::size_t j = 0; j < data.m(); ++j) {
    const ThetaConditional cond = theta_conditional(state, data, prior, j);
    const Eigen::LLT<Eigen::MatrixXd> llt(cond.precision);
    Eigen::VectorXd z(cond.mean.size());
    for (Eigen::Index r = 0; r < z.size(); ++r) z[r] = rng.normal();
    // precision = L L^T, so L^{-T} z has covariance precision^{-1}.
    state.theta[j] = cond.mean + llt.matrixU().solve(z);
  }
}

UnnormalizedLogDensity x0_target(const ChainState& state, const MultiSeries& data,
                                 const PriorConfig& prior, std::size_t j) {
  const double tau = point_precision(state, j, 1);
  const double x1 = data.series[j].observations.front();
  const Eigen::VectorXd theta = state.theta[j];
  return {[=](double x0) {
            const double e = x1 - eval_theta(theta, x0);
            return -0.5 * tau * e * e;
          },
          prior.x0_support[j]};
}

void update_x0(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
               const GibbsConfig& config, Rng& rng) {
  for (std::size_t j = 0; j < data.m(); ++j) {
    const auto target = x0_target(state, data, prior, j);
    state.x0[j] = slice_sample_1d(target, state.x0[j], config.slice_width, config.max_stepout, rng);
  }
}

UnnormalizedLogDensity future_target(const ChainState& state, const MultiSeries& data, std::size_t j,
                                     std::size_t k) {
  const Series& s = data.series[j];
  const std::size_t i = s.n() + k;
  const double tau_here = point_precision(state, j, i);
  const double tau_next = point_precision(state, j, i + 1);
  const double prev = path_value(s, state, j, i - 1);
  const double next = path_value(s, state, j, i + 1);
  const Eigen::VectorXd theta = state.theta[j];
  const double mean_here = eval_theta(theta, prev);
  return {[=](double x) {
            const double e1 = x - mean_here;
            const double e2 = next - eval_theta(theta, x);
            return -0.5 * (tau_here * e1 * e1 + tau_next * e2 * e2);
          },
          kFutureSupport};
}

void update_future(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                   const GibbsConfig& config, Rng& rng) {
  for (std::size_t j = 0; j < data.m(); ++j) {
    const std::size_t T = prior.horizon[j];
    if (T == 0) continue;
    for (std::size_t k = 1; k < T; ++k) {
      const auto target = future_target(state, data, j, k);
      state.future[j][k - 1] =
          slice_sample_1d(target, state.future[j][k - 1], config.slice_width, config.max_stepout, rng);
    }
    const std::size_t i = data.series[j].n() + T;
    const double mean = eval_theta(state.theta[j], path_value(data.series[j], state, j, i - 1));
    const double tau = point_precision(state, j, i);
    state.future[j][T - 1] = draw_normal(mean, 1.0 / std::sqrt(tau), rng);
  }
}

// ---------------------------------------------------------------------------
// Noise predictive

std::vector<double> sample_noise_predictive(const ChainState& state, const PriorConfig& prior, Rng& rng) {
  const std::size_t m = state.alloc.size();
  const auto n_star = static_cast<std::size_t>(state.max_slice());
  std::vector<double> z(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::VectorXd row = state.p.row(idx(j)).transpose();
    const std::size_t l = draw_categorical(std::span<const double>(row.data(), m), rng);
    const auto weights = geometric_weights(state.lambda(idx(j), idx(l)), n_star);
    const std::size_t k = draw_categorical(weights, rng);
    const double tau = k == n_star ? draw_gamma(prior.gamma_a, prior.gamma_b, rng)
                                   : state.atoms.atoms(j, l)[k];
    z[j] = draw_normal(0.0, 1.0 / std::sqrt(tau), rng);
  }
  return z;
}

// ---------------------------------------------------------------------------
// Parametric common-precision baseline

GammaParams common_precision_posterior(const ChainState& state, const MultiSeries& data,
                                       const PriorConfig& prior) {
  GammaParams post{prior.gamma_a, prior.gamma_b};
  for (std::size_t j = 0; j < data.m(); ++j) {
    const std::size_t len = data.series[j].n() + state.future[j].size();
    for (std::size_t i = 1; i <= len; ++i) {
      post.shape += 0.5;
      post.rate += 0.5 * squared_residual(state, data, j, i);
    }
  }
  return post;
}

void update_common_precision(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                             Rng& rng) {
  const GammaParams post = common_precision_posterior(state, data, prior);
  state.common_precision = draw_gamma(post.shape, post.rate, rng);
}

ChainState init_parametric(const MultiSeries& data, const PriorConfig& prior, Rng& rng) {
  data.validate();
  prior.validate();
  if (prior.m != data.m()) throw ConfigError("prior m does not match the number of series");
  ChainState state;
  init_paths(state, data, prior);
  state.common_precision = draw_gamma(prior.gamma_a, prior.gamma_b, rng);
  return state;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<double> sweep(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                          const GibbsConfig& config, Rng& rng) {
  update_alloc_block(state, data, prior, rng);
  update_slice_N(state, prior, rng);
  update_precisions(state, data, prior, rng);
  update_selection_probs(state, prior, rng);
  update_geometric_probs(state, prior, rng);
  update_theta(state, data, prior, rng);
  update_x0(state, data, prior, config, rng);
  update_future(state, data, prior, config, rng);
  return sample_noise_predictive(state, prior, rng);
}

namespace {

// GSBR cluster update: d_i | N_i over {1..N_i} with weights
// lambda^2 (1 - lambda)^(N - 1) N(x_i | g(x_{i-1}), 1/tau_k).
void gsbr_update_clusters(ChainState& state, const MultiSeries& data, const PriorConfig& prior, Rng& rng) {
  auto& a = state.alloc[0];
  const double lam = state.lambda(0, 0);
  const auto& taus = state.atoms.atoms(0, 0);
  const std::size_t len = path_length(data, prior, 0);
  std::vector<double> logw;
  for (std::size_t i = 1; i <= len; ++i) {
    const std::int64_t N = a.N[i - 1];
    const double h = squared_residual(state, data, 0, i);
    const double base = 0.0 + 2.0 * std::log(lam) + static_cast<double>(N - 1) * std::log1p(-lam);
    logw.resize(static_cast<std::size_t>(N));
    for (std::int64_t k = 0; k < N; ++k) {
      const double tau = taus[static_cast<std::size_t>(k)];
      logw[static_cast<std::size_t>(k)] = base + 0.5 * std::log(tau) - 0.5 * tau * h;
    }
    a.d[i - 1] = static_cast<std::int64_t>(draw_categorical_log(logw, rng)) + 1;
  }
}

double gsbr_noise_predictive(const ChainState& state, const PriorConfig& prior, Rng& rng) {
  const auto n_star = static_cast<std::size_t>(state.max_slice());
  const auto weights = geometric_weights(state.lambda(0, 0), n_star);
  const std::size_t k = draw_categorical(weights, rng);
  const double tau = k == n_star ? draw_gamma(prior.gamma_a, prior.gamma_b, rng)
                                 : state.atoms.atoms(0, 0)[k];
  return draw_normal(0.0, 1.0 / std::sqrt(tau), rng);
}

}  // namespace

std::vector<double> gsbr_sweep(ChainState& state, const MultiSeries& data, const PriorConfig& prior,
                               const GibbsConfig& config, Rng& rng) {
  if (data.m() != 1) throw ConfigError("the GSBR sampler handles exactly one series");
  gsbr_update_clusters(state, data, prior, rng);
  update_slice_N(state, prior, rng);
  update_precisions(state, data, prior, rng);
  update_geometric_probs(state, prior, rng);
  update_theta(state, data, prior, rng);
  update_x0(state, data, prior, config, rng);
  update_future(state, data, prior, config, rng);
  return {gsbr_noise_predictive(state, prior, rng)};
}

std::vector<double> parametric_sweep(ChainState& state, const MultiSeries& data,
                                     const PriorConfig& prior, const GibbsConfig& config, Rng& rng) {
  update_common_precision(state, data, prior, rng);
  update_theta(state, data, prior, rng);
  update_x0(state, data, prior, config, rng);
  update_future(state, data, prior, config, rng);
  std::vector<double> z(data.m());
  const double sd = 1.0 / std::sqrt(*state.common_precision);
  for (double& v : z) v = draw_normal(0.0, sd, rng);
  return z;
}

// ---------------------------------------------------------------------------
// Chain driver

std::vector<TraceRecord> run_chain(const MultiSeries& data, const PriorConfig& prior,
                                   const GibbsConfig& config, const ChainHooks& hooks,
                                   const Checkpoint* resume) {
  config.validate();
  prior.validate();
  data.validate();
  if (prior.m != data.m()) throw ConfigError("prior m does not match the number of series");
  if (config.kind == SamplerKind::gsbr && data.m() != 1) {
    throw ConfigError("the GSBR sampler handles exactly one series; use pdgsbr for m > 1");
  }

  Rng rng(config.seed);
  ChainState state;
  if (resume) {
    if (resume->kind != config.kind) throw ConfigError("checkpoint was written by a different sampler");
    state = resume->state;
    rng.restore(resume->rng_state);
    if (config.kind != SamplerKind::parametric) check_invariants(state, data, prior);
  } else if (config.kind == SamplerKind::parametric) {
    state = init_parametric(data, prior, rng);
  } else {
    state = init_chain(data, prior, rng);
  }

  std::vector<TraceRecord> records;
  for (std::uint64_t it = state.iteration + 1; it <= config.total_iterations; ++it) {
    std::vector<double> noise;
    try {
      switch (config.kind) {
        case SamplerKind::pdgsbr: noise = sweep(state, data, prior, config, rng); break;
        case SamplerKind::gsbr: noise = gsbr_sweep(state, data, prior, config, rng); break;
        case SamplerKind::parametric: noise = parametric_sweep(state, data, prior, config, rng); break;
      }
    } catch (const KernelError&) {
      throw;
    } catch (const Error& e) {
      throw KernelError(it, "iteration " + std::to_string(it) + ": " + e.what());
    }
    state.iteration = it;

    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      records.push_back(make_record(state, std::move(noise)));
      if (hooks.on_record) hooks.on_record(records.back());
    }
    const bool due = (config.checkpoint_interval > 0 && it % config.checkpoint_interval == 0) ||
                     it == config.total_iterations;
    if (due && hooks.on_checkpoint) {
      hooks.on_checkpoint(Checkpoint{state, rng.state(), config.kind});
    }
    if (hooks.progress && it % 1000 == 0) {
      *hooks.progress << "[" << to_string(config.kind) << "] sweep " << it << "/"
                      << config.total_iterations << " N*=" << state.max_slice() << '\n';
    }
  }
  return records;
}

std::vector<TraceRecord> run_parametric_gaussian(const MultiSeries& data, const PriorConfig& prior,
                                                 const GibbsConfig& config, const ChainHooks& hooks) {
  GibbsConfig cfg = config;
  cfg.kind = SamplerKind::parametric;
  return run_chain(data, prior, cfg, hooks);
}

// ---------------------------------------------------------------------------
// Density oracles

double augmented_joint_density(const ChainState& state, const MultiSeries& data, std::size_t j,
                               std::size_t i, std::int64_t r, std::size_t k, std::size_t l) {
  if (static_cast<std::int64_t>(k) > r || k < 1) return 0.0;
  const Series& s = data.series[j];
  const double lam = state.lambda(idx(j), idx(l));
  const double mean = eval_theta(state.theta[j], path_value(s, state, j, i - 1));
  return state.p(idx(j), idx(l)) * lam * lam * std::pow(1.0 - lam, static_cast<double>(r - 1)) *
         std::exp(log_normal_density(path_value(s, state, j, i), mean, state.atoms.tau(j, l, k)));
}

double noise_mixture_density(const ChainState& state, std::size_t j, double z, std::size_t K,
                             std::span<const double> tail_precision) {
  const std::size_t m = state.alloc.size();
  double f = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    const auto w = geometric_weights(state.lambda(idx(j), idx(l)), K);
    const auto& taus = state.atoms.atoms(j, l);
    double inner = 0.0;
    for (std::size_t k = 0; k < K; ++k) inner += w[k] * std::exp(log_normal_density(z, 0.0, taus[k]));
    inner += w[K] * std::exp(log_normal_density(z, 0.0, tail_precision[l]));
    f += state.p(idx(j), idx(l)) * inner;
  }
  return f;
}

}  // namespace pdgsbr

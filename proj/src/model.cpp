#include "pdgsbr/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pdgsbr/errors.hpp"

namespace pdgsbr {

PriorConfig PriorConfig::defaults(std::size_t m, const Eigen::MatrixXd& dirichlet_alpha) {
  PriorConfig prior;
  prior.m = m;
  prior.poly_degree = 5;
  prior.dirichlet_alpha = dirichlet_alpha;
  prior.beta_a = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m), 0.5);
  prior.beta_b = prior.beta_a;
  prior.gamma_a = 1e-3;
  prior.gamma_b = 1e-3;
  prior.horizon.assign(m, 1);
  prior.x0_support.assign(m, Interval{-5.0, 5.0});
  return prior;
}

void PriorConfig::validate() const {
  const auto mm = static_cast<Eigen::Index>(m);
  if (m < 1) throw ConfigError("prior: m must be at least 1");
  if (dirichlet_alpha.rows() != mm || dirichlet_alpha.cols() != mm) {
    throw ConfigError("prior: dirichlet alpha must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  if (beta_a.rows() != mm || beta_a.cols() != mm || beta_b.rows() != mm || beta_b.cols() != mm) {
    throw ConfigError("prior: beta hyperparameter matrices must be m x m");
  }
  if (!(dirichlet_alpha.array() > 0.0).all() || !dirichlet_alpha.allFinite()) {
    throw ConfigError("prior: dirichlet alpha entries must be positive");
  }
  if (!(beta_a.array() > 0.0).all() || !(beta_b.array() > 0.0).all()) {
    throw ConfigError("prior: beta hyperparameters must be positive");
  }
  if (beta_a != beta_a.transpose() || beta_b != beta_b.transpose()) {
    throw ConfigError("prior: beta hyperparameter matrices must be symmetric");
  }
  if (!(gamma_a > 0.0) || !(gamma_b > 0.0)) throw ConfigError("prior: gamma a, b must be positive");
  if (horizon.size() != m) throw ConfigError("prior: horizon needs one entry per series");
  if (x0_support.size() != m) throw ConfigError("prior: x0_support needs one entry per series");
  for (const auto& s : x0_support) {
    if (!(s.lo < s.hi)) throw ConfigError("prior: x0_support intervals need lo < hi");
  }
}

AtomTable::AtomTable(std::size_t m) : m_(m), pairs_(m * (m + 1) / 2) {}

std::size_t AtomTable::pair_index(std::size_t j, std::size_t l, std::size_t m) {
  const std::size_t a = std::min(j, l);
  const std::size_t b = std::max(j, l);
  return a * (2 * m - a + 1) / 2 + (b - a);
}

std::int64_t ChainState::max_slice() const {
  std::int64_t best = 0;
  for (const auto& a : alloc) {
    for (auto n : a.N) best = std::max(best, n);
  }
  return best;
}

bool ChainState::operator==(const ChainState& other) const {
  if (theta.size() != other.theta.size()) return false;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (theta[j] != other.theta[j]) return false;
  }
  return atoms == other.atoms && alloc == other.alloc && p == other.p && lambda == other.lambda &&
         x0 == other.x0 && future == other.future && iteration == other.iteration &&
         common_precision == other.common_precision && ols_fallback == other.ols_fallback;
}

double path_value(const Series& series, const ChainState& state, std::size_t j, std::size_t i) {
  if (i == 0) return state.x0[j];
  if (i <= series.n()) return series.observations[i - 1];
  return state.future[j][i - series.n() - 1];
}

double point_precision(const ChainState& state, std::size_t j, std::size_t i) {
  if (state.common_precision) return *state.common_precision;
  const auto& a = state.alloc[j];
  return state.atoms.tau(j, static_cast<std::size_t>(a.delta[i - 1]),
                         static_cast<std::size_t>(a.d[i - 1]));
}

void check_invariants(const ChainState& state, const MultiSeries& data, const PriorConfig& prior) {
  const std::size_t m = data.m();
  auto fail = [](const std::string& what) { throw InvalidStateError("chain state: " + what); };
  if (state.theta.size() != m || state.x0.size() != m || state.future.size() != m) {
    fail("per-series vectors do not match m");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (state.theta[j].size() != static_cast<Eigen::Index>(prior.poly_degree + 1)) {
      fail("theta length differs from poly_degree + 1");
    }
    if (!state.theta[j].allFinite()) fail("non-finite theta");
    if (!prior.x0_support[j].contains(state.x0[j])) fail("x0 outside its support");
    if (state.future[j].size() != prior.horizon[j]) fail("future length differs from horizon");
  }
  if (state.common_precision) {
    if (!(*state.common_precision > 0.0)) fail("common precision must be positive");
    return;
  }
  if (state.alloc.size() != m || state.atoms.m() != m) fail("allocation/atom tables do not match m");
  if (state.p.rows() != static_cast<Eigen::Index>(m) || state.p.cols() != static_cast<Eigen::Index>(m)) {
    fail("p must be m x m");
  }
  for (Eigen::Index j = 0; j < state.p.rows(); ++j) {
    if (std::abs(state.p.row(j).sum() - 1.0) > 1e-12) fail("row of p does not sum to 1");
    if (!(state.p.row(j).array() > 0.0).all()) fail("p entries must be positive");
  }
  if (state.lambda != state.lambda.transpose()) fail("lambda not symmetric");
  if (!(state.lambda.array() > 0.0).all() || !(state.lambda.array() < 1.0).all()) {
    fail("lambda entries must lie in (0,1)");
  }
  const std::int64_t n_star = state.max_slice();
  for (const auto& seq : state.atoms.raw()) {
    if (static_cast<std::int64_t>(seq.size()) < n_star) fail("atom table shorter than N*");
    for (double t : seq) {
      if (!(t > 0.0) || !std::isfinite(t)) fail("non-positive precision");
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto& a = state.alloc[j];
    const std::size_t len = data.series[j].n() + prior.horizon[j];
    if (a.delta.size() != len || a.d.size() != len || a.N.size() != len) fail("allocation length");
    for (std::size_t i = 0; i < len; ++i) {
      if (a.delta[i] < 0 || a.delta[i] >= static_cast<int>(m)) fail("delta out of range");
      if (a.d[i] < 1 || a.d[i] > a.N[i]) fail("d must satisfy 1 <= d <= N");
    }
  }
}

Eigen::VectorXd monomials(double x, std::size_t degree) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(degree + 1));
  double power = 1.0;
  for (Eigen::Index r = 0; r < v.size(); ++r) {
    v[r] = power;
    power *= x;
  }
  return v;
}

double eval_theta(const Eigen::VectorXd& theta, double x) {
  double acc = 0.0;
  for (Eigen::Index r = theta.size() - 1; r >= 0; --r) acc = acc * x + theta[r];
  return acc;
}

namespace {

std::optional<Eigen::VectorXd> least_squares_theta(const std::vector<double>& x, std::size_t degree) {
  const std::size_t cols = degree + 1;
  if (x.size() < cols + 1) return std::nullopt;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(x.size() - 1), static_cast<Eigen::Index>(cols));
  Eigen::VectorXd target(design.rows());
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    design.row(i) = monomials(x[static_cast<std::size_t>(i)], degree).transpose();
    target[i] = x[static_cast<std::size_t>(i) + 1];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(cols)) return std::nullopt;
  return Eigen::VectorXd(qr.solve(target));
}

}  // namespace

ChainState init_chain(const MultiSeries& data, const PriorConfig& prior, Rng& rng) {
  data.validate();
  prior.validate();
  const std::size_t m = data.m();
  if (prior.m != m) throw ConfigError("prior m does not match the number of series");

  ChainState state;
  state.atoms = AtomTable(m);
  state.p.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    const Eigen::VectorXd alpha = prior.dirichlet_alpha.row(static_cast<Eigen::Index>(j)).transpose();
    const auto row = draw_dirichlet(std::span<const double>(alpha.data(), m), rng);
    for (std::size_t l = 0; l < m; ++l) state.p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) = row[l];
  }
  state.lambda.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = j; l < m; ++l) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto ll = static_cast<Eigen::Index>(l);
      // Prior draw kept away from 0 so the first slice update cannot ask for
      // an astronomically long atom sequence.
      double lam = 0.0;
      do {
        lam = draw_beta(prior.beta_a(jj, ll), prior.beta_b(jj, ll), rng);
      } while (lam < 1e-3);
      state.lambda(jj, ll) = lam;
      state.lambda(ll, jj) = lam;
    }
  }
  state.alloc.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t len = data.series[j].n() + prior.horizon[j];
    auto& a = state.alloc[j];
    a.delta.resize(len);
    const Eigen::VectorXd row = state.p.row(static_cast<Eigen::Index>(j)).transpose();
    for (std::size_t i = 0; i < len; ++i) {
      a.delta[i] = static_cast<int>(draw_categorical(std::span<const double>(row.data(), m), rng));
    }
  }
  init_paths(state, data, prior);
  init_atoms(state, data);
  return state;
}

namespace {

std::vector<double> start_residuals(const ChainState& state, const MultiSeries& data, std::size_t j) {
  const auto& obs = data.series[j].observations;
  std::vector<double> path;
  path.reserve(obs.size() + state.future[j].size() + 1);
  path.push_back(state.x0[j]);
  path.insert(path.end(), obs.begin(), obs.end());
  path.insert(path.end(), state.future[j].begin(), state.future[j].end());
  std::vector<double> r2(path.size() - 1);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const double e = path[i] - eval_theta(state.theta[j], path[i - 1]);
    r2[i - 1] = std::isfinite(e) ? e * e : 0.0;
  }
  return r2;
}

}  // namespace

void init_atoms(ChainState& state, const MultiSeries& data) {
  const std::size_t m = data.m();
  std::vector<std::vector<double>> r2(m);
  for (std::size_t j = 0; j < m; ++j) r2[j] = start_residuals(state, data, j);

  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = j; l < m; ++l) {
      std::vector<double> pooled = r2[j];
      if (l != j) pooled.insert(pooled.end(), r2[l].begin(), r2[l].end());
      std::sort(pooled.begin(), pooled.end());
      auto& seq = state.atoms.atoms(j, l);
      seq.resize(kInitAtoms);
      for (std::size_t k = 0; k < kInitAtoms; ++k) {
        const auto q = static_cast<std::size_t>((double(k) + 0.5) / double(kInitAtoms) * double(pooled.size()));
        seq[k] = 1.0 / std::clamp(pooled[std::min(q, pooled.size() - 1)], 1e-300, 1e300);
      }
    }
  }

  for (std::size_t j = 0; j < m; ++j) {
    auto& a = state.alloc[j];
    a.d.resize(a.delta.size());
    a.N.assign(a.delta.size(), static_cast<std::int64_t>(kInitAtoms));
    for (std::size_t i = 0; i < a.delta.size(); ++i) {
      const auto& seq = state.atoms.atoms(j, static_cast<std::size_t>(a.delta[i]));
      const double target = -std::log(std::max(r2[j][i], 1e-300));
      std::size_t best = 0;
      for (std::size_t k = 1; k < seq.size(); ++k) {
        if (std::abs(std::log(seq[k]) - target) < std::abs(std::log(seq[best]) - target)) best = k;
      }
      a.d[i] = static_cast<std::int64_t>(best) + 1;
    }
  }
}

void init_paths(ChainState& state, const MultiSeries& data, const PriorConfig& prior) {
  const std::size_t m = data.m();
  state.theta.resize(m);
  state.x0.resize(m);
  state.future.resize(m);
  state.ols_fallback.assign(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    const Series& s = data.series[j];
    if (auto fit = least_squares_theta(s.observations, prior.poly_degree)) {
      state.theta[j] = *fit;
    } else {
      state.theta[j] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prior.poly_degree + 1));
      state.ols_fallback[j] = true;
    }
    const Interval& support = prior.x0_support[j];
    state.x0[j] = std::clamp(s.observations.front(), support.lo, support.hi);

    double x = s.observations.back();
    state.future[j].resize(prior.horizon[j]);
    for (auto& f : state.future[j]) {
      x = eval_theta(state.theta[j], x);
      if (!std::isfinite(x)) x = s.observations.back();
      f = x;
    }
  }
}

void ensure_atoms(ChainState& state, const PriorConfig& prior, Rng& rng) {
  const auto n_star = static_cast<std::size_t>(state.max_slice());
  for (auto& seq : state.atoms.raw()) {
    while (seq.size() < n_star) seq.push_back(draw_gamma(prior.gamma_a, prior.gamma_b, rng));
  }
}

std::vector<double> geometric_weights(double lambda, std::size_t K) {
  std::vector<double> w(K + 1);
  double survival = 1.0;  // (1 - lambda)^(k - 1)
  for (std::size_t k = 0; k < K; ++k) {
    w[k] = lambda * survival;
    survival *= 1.0 - lambda;
  }
  w[K] = std::pow(1.0 - lambda, static_cast<double>(K));
  return w;
}

bool TraceRecord::operator==(const TraceRecord& other) const {
  if (theta.size() != other.theta.size()) return false;
  for (std::size_t j = 0; j < theta.size(); ++j) {
    if (theta[j] != other.theta[j]) return false;
  }
  auto same_matrix = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return iteration == other.iteration && same_matrix(p, other.p) && same_matrix(lambda, other.lambda) &&
         x0 == other.x0 && future == other.future && noise == other.noise &&
         atom_counts == other.atom_counts && common_precision == other.common_precision;
}

TraceRecord make_record(const ChainState& state, std::vector<double> noise) {
  TraceRecord rec;
  rec.iteration = state.iteration;
  rec.theta = state.theta;
  rec.x0 = state.x0;
  rec.future = state.future;
  rec.noise = std::move(noise);
  rec.common_precision = state.common_precision;
  if (!state.common_precision) {
    rec.p = state.p;
    rec.lambda = state.lambda;
    for (const auto& seq : state.atoms.raw()) rec.atom_counts.push_back(seq.size());
  }
  return rec;
}

}  // namespace pdgsbr

#include "pdgsbr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pdgsbr/errors.hpp"

namespace pdgsbr {

namespace {

void require_trace(const std::vector<TraceRecord>& trace, const char* what) {
  if (trace.empty()) throw InsufficientSamplesError(std::string(what) + ": empty trace");
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double pare(double estimate, double truth) {
  if (!std::isfinite(estimate) || !std::isfinite(truth)) {
    throw ParameterDomainError("pare needs finite arguments");
  }
  const double err = std::abs(estimate - truth);
  return truth == 0.0 ? 100.0 * err : 100.0 * err / std::abs(truth);
}

std::vector<double> ergodic_average(std::span<const double> samples) {
  if (samples.empty()) throw InsufficientSamplesError("ergodic_average: no samples");
  std::vector<double> out(samples.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    sum += samples[k];
    out[k] = sum / static_cast<double>(k + 1);
  }
  return out;
}

double boi(const std::vector<TraceRecord>& trace, std::size_t j, const std::vector<std::size_t>& donors) {
  require_trace(trace, "boi");
  for (std::size_t l : donors) {
    if (l == j) throw ParameterDomainError("boi: donor set must exclude the borrowing series");
  }
  if (trace.front().p.size() == 0) throw SchemaError("boi: trace carries no selection probabilities");
  const auto m = static_cast<std::size_t>(trace.front().p.rows());
  if (j >= m) throw ParameterDomainError("boi: series index out of range");
  double sum = 0.0;
  for (const auto& rec : trace) {
    for (std::size_t l : donors) {
      if (l >= m) throw ParameterDomainError("boi: donor index out of range");
      sum += rec.p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
    }
  }
  return sum / static_cast<double>(trace.size());
}

Eigen::MatrixXd posterior_mean_matrix(const std::vector<TraceRecord>& trace) {
  require_trace(trace, "posterior_mean_matrix");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(trace.front().p.rows(), trace.front().p.cols());
  for (const auto& rec : trace) acc += rec.p;
  return acc / static_cast<double>(trace.size());
}

Eigen::MatrixXd posterior_mean_lambda(const std::vector<TraceRecord>& trace) {
  require_trace(trace, "posterior_mean_lambda");
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(trace.front().lambda.rows(), trace.front().lambda.cols());
  for (const auto& rec : trace) acc += rec.lambda;
  return acc / static_cast<double>(trace.size());
}

std::vector<Eigen::VectorXd> posterior_mean_theta(const std::vector<TraceRecord>& trace) {
  require_trace(trace, "posterior_mean_theta");
  std::vector<Eigen::VectorXd> acc;
  for (const auto& t : trace.front().theta) acc.push_back(Eigen::VectorXd::Zero(t.size()));
  for (const auto& rec : trace) {
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += rec.theta[j];
  }
  for (auto& v : acc) v /= static_cast<double>(trace.size());
  return acc;
}

Hpdi hpdi(std::span<const double> samples, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw ParameterDomainError("hpdi: mass must lie in (0, 1)");
  if (samples.size() < 100) {
    throw InsufficientSamplesError("hpdi needs at least 100 samples, got " + std::to_string(samples.size()));
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto keep = std::min(n, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))));
  std::size_t best = 0;
  double best_width = sorted[keep - 1] - sorted[0];
  for (std::size_t s = 1; s + keep <= n; ++s) {
    const double w = sorted[s + keep - 1] - sorted[s];
    if (w < best_width) {
      best_width = w;
      best = s;
    }
  }
  return {sorted[best], sorted[best + keep - 1], mass};
}

double silverman_bandwidth(std::span<const double> samples) {
  const auto n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double sigma = iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
  if (!(sigma > 0.0)) {
    // Degenerate sample: fall back to a scale tied to the magnitude of the data.
    sigma = std::max(1e-3 * std::abs(mean), 1e-12);
  }
  return 1.06 * sigma * std::pow(n, -0.2);
}

KdeGrid kde(std::span<const double> samples, std::optional<GridSpec> grid, std::optional<double> bandwidth) {
  if (samples.size() < 2) throw InsufficientSamplesError("kde needs at least 2 samples");
  KdeGrid out;
  out.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(out.bandwidth > 0.0)) throw ParameterDomainError("kde: bandwidth must be positive");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const GridSpec spec = grid ? *grid : GridSpec{*mn - 4.0 * out.bandwidth, *mx + 4.0 * out.bandwidth, 512};
  if (spec.points < 2 || !(spec.hi > spec.lo)) throw ParameterDomainError("kde: invalid grid");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = out.bandwidth;
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  const double cutoff = 8.5 * h;  // exp(-36) is below double rounding of the sum
  out.grid.resize(spec.points);
  out.density.resize(spec.points);
  const double step = (spec.hi - spec.lo) / static_cast<double>(spec.points - 1);
  for (std::size_t g = 0; g < spec.points; ++g) {
    const double x = spec.lo + step * static_cast<double>(g);
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    const auto end = std::upper_bound(it, sorted.end(), x + cutoff);
    double acc = 0.0;
    for (; it != end; ++it) {
      const double u = (x - *it) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out.grid[g] = x;
    out.density[g] = acc * norm;
  }
  return out;
}

std::size_t count_modes(const KdeGrid& kde, double rel_floor) {
  const auto& f = kde.density;
  if (f.empty()) return 0;
  const double floor = rel_floor * *std::max_element(f.begin(), f.end());
  std::size_t modes = 0;
  for (std::size_t g = 0; g < f.size(); ++g) {
    if (f[g] < floor) continue;
    const bool left = g == 0 || f[g] > f[g - 1];
    // Plateaus count once, at their left edge.
    std::size_t r = g + 1;
    while (r < f.size() && f[r] == f[g]) ++r;
    const bool right = r == f.size() || f[g] > f[r];
    if (left && right) ++modes;
  }
  return modes;
}

double integrate(const KdeGrid& kde) {
  double acc = 0.0;
  for (std::size_t g = 1; g < kde.grid.size(); ++g) {
    acc += 0.5 * (kde.density[g] + kde.density[g - 1]) * (kde.grid[g] - kde.grid[g - 1]);
  }
  return acc;
}

PareTable pare_table(const std::vector<TraceRecord>& trace, const MultiSeries& data) {
  require_trace(trace, "pare_table");
  if (!data.has_truth()) throw TruthUnavailableError("pare_table needs ground-truth maps in the data");
  const auto means = posterior_mean_theta(trace);
  if (means.size() != data.m()) throw SchemaError("pare_table: trace and data disagree on m");
  PareTable table;
  for (std::size_t j = 0; j < means.size(); ++j) {
    const auto truth = data.series[j].truth->map.padded(static_cast<std::size_t>(means[j].size() - 1));
    std::vector<double> row;
    double sum = 0.0;
    for (Eigen::Index r = 0; r < means[j].size(); ++r) {
      row.push_back(pare(means[j][r], truth[static_cast<std::size_t>(r)]));
      sum += row.back();
    }
    table.row_means.push_back(sum / static_cast<double>(row.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace pdgsbr

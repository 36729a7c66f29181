#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/model.hpp"

namespace pdgsbr {

/// 100 |estimate - truth| / |truth|, or 100 |estimate - truth| when truth = 0.
double pare(double estimate, double truth);

std::vector<double> ergodic_average(std::span<const double> samples);

/// Trace average of sum_{l in donors} p_{jl}.
double boi(const std::vector<TraceRecord>& trace, std::size_t j, const std::vector<std::size_t>& donors);

/// Elementwise trace average of p.
Eigen::MatrixXd posterior_mean_matrix(const std::vector<TraceRecord>& trace);

/// Elementwise trace average of lambda.
Eigen::MatrixXd posterior_mean_lambda(const std::vector<TraceRecord>& trace);

std::vector<Eigen::VectorXd> posterior_mean_theta(const std::vector<TraceRecord>& trace);

struct Hpdi {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.95;

  double width() const { return upper - lower; }
};

/// Shortest window of ceil(mass * n) order statistics. Needs at least 100 samples.
Hpdi hpdi(std::span<const double> samples, double mass);

struct KdeGrid {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t points = 512;
};

/// 1.06 * sigma * n^(-1/5) with sigma = min(sd, IQR / 1.349) when the IQR is
/// positive.
double silverman_bandwidth(std::span<const double> samples);

/// Gaussian-kernel estimate. Without a grid, spans the sample extremes plus
/// four bandwidths on each side; without a bandwidth, uses Silverman's rule.
KdeGrid kde(std::span<const double> samples, std::optional<GridSpec> grid = std::nullopt,
            std::optional<double> bandwidth = std::nullopt);

/// Strict local maxima of the density, ignoring bumps below `rel_floor` times
/// the global maximum.
std::size_t count_modes(const KdeGrid& kde, double rel_floor = 1e-2);

/// Trapezoid integral of the estimate over its grid.
double integrate(const KdeGrid& kde);

struct PareTable {
  /// rows[j][r] = PARE of the posterior-mean coefficient r of series j.
  std::vector<std::vector<double>> rows;
  std::vector<double> row_means;
};

/// Compares posterior-mean coefficients with the true maps padded to the
/// fitted degree. Throws TruthUnavailableError without ground truth.
PareTable pare_table(const std::vector<TraceRecord>& trace, const MultiSeries& data);

}  // namespace pdgsbr

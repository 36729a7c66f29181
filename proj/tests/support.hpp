#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/model.hpp"

namespace testsupport {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  std::size_t n = 0;

  double se_mean() const { return std::sqrt(var / static_cast<double>(n)); }
};

inline Moments moments(std::span<const double> x) {
  Moments m;
  m.n = x.size();
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(m.n);
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

/// Standard error of the sample variance from the fourth central moment.
inline double se_variance(std::span<const double> x) {
  const Moments m = moments(x);
  double m4 = 0.0;
  for (double v : x) m4 += std::pow(v - m.mean, 4);
  m4 /= static_cast<double>(m.n);
  return std::sqrt(std::max(m4 - m.var * m.var, 0.0) / static_cast<double>(m.n));
}

/// Integrated autocorrelation time by Geyer's initial positive sequence.
inline double autocorrelation_time(std::span<const double> x) {
  const Moments m = moments(x);
  const std::size_t n = x.size();
  auto rho = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m.mean) * (x[i + lag] - m.mean);
    return s / (static_cast<double>(n) * m.var);
  };
  double tau = 1.0;
  for (std::size_t lag = 1; lag + 1 < n / 2; lag += 2) {
    const double pair = rho(lag) + rho(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return tau;
}

/// Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Trapezoid normalizing constant and cell masses of exp(logf) on [lo, hi].
inline std::vector<double> quadrature_cell_masses(const std::function<double(double)>& logf, double lo,
                                                  double hi, std::size_t cells,
                                                  std::size_t sub = 200) {
  std::vector<double> mass(cells, 0.0);
  const double w = (hi - lo) / static_cast<double>(cells);
  const double h = w / static_cast<double>(sub);
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t s = 0; s < sub; ++s) {
      const double a = lo + static_cast<double>(c) * w + static_cast<double>(s) * h;
      mass[c] += 0.5 * h * (std::exp(logf(a)) + std::exp(logf(a + h)));
    }
    total += mass[c];
  }
  for (double& v : mass) v /= total;
  return mass;
}

inline double total_variation(std::span<const double> samples, std::span<const double> cell_mass,
                              double lo, double hi) {
  std::vector<double> hist(cell_mass.size(), 0.0);
  const double w = (hi - lo) / static_cast<double>(cell_mass.size());
  for (double v : samples) {
    auto c = static_cast<std::size_t>((v - lo) / w);
    if (c >= hist.size()) c = hist.size() - 1;
    hist[c] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t c = 0; c < hist.size(); ++c) {
    tv += std::abs(hist[c] / static_cast<double>(samples.size()) - cell_mass[c]);
  }
  return 0.5 * tv;
}

inline pdgsbr::Series make_series(std::vector<double> obs) {
  pdgsbr::Series s;
  s.observations = std::move(obs);
  return s;
}

/// Deterministic noiseless orbit of `map` from x0, n points.
inline std::vector<double> orbit(const pdgsbr::PolynomialMap& map, double x0, std::size_t n) {
  std::vector<double> x;
  double v = x0;
  for (std::size_t i = 0; i < n; ++i) {
    v = pdgsbr::eval_map(map, v);
    x.push_back(v);
  }
  return x;
}

}  // namespace testsupport

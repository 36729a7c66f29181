#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "pdgsbr/diagnostics.hpp"
#include "pdgsbr/errors.hpp"
#include "support.hpp"

using namespace pdgsbr;

namespace {

TraceRecord record_with_p(const Eigen::MatrixXd& p) {
  TraceRecord r;
  r.p = p;
  r.lambda = Eigen::MatrixXd::Constant(p.rows(), p.cols(), 0.5);
  return r;
}

std::vector<double> normal_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("pare") {
  CHECK(pare(1.01, 1.0) == doctest::Approx(1.0));
  CHECK(pare(0.004, 0.0) == doctest::Approx(0.4));
  CHECK(pare(-1.65, -1.65) == 0.0);
  for (double t : {-2.0, 0.0, 0.05, 2.55}) {
    CHECK(pare(t + 0.013, t) == doctest::Approx(pare(t - 0.013, t)).epsilon(1e-10));
  }
}

TEST_CASE("ergodic average") {
  const std::vector<double> a{1, 3};
  CHECK(ergodic_average(a) == std::vector<double>{1, 2});
  const std::vector<double> c(10, 4.25);
  CHECK(ergodic_average(c) == c);
  const auto x = normal_samples(100000, 301);
  CHECK(std::abs(ergodic_average(x).back()) < 3.0 / std::sqrt(double(x.size())));
  std::vector<double> thin;
  for (std::size_t i = 0; i < x.size(); i += 5) thin.push_back(x[i]);
  const double se = std::sqrt(1.0 / double(x.size()) + 1.0 / double(thin.size()));
  CHECK(std::abs(ergodic_average(x).back() - ergodic_average(thin).back()) < 4.0 * se);
}

TEST_CASE("boi and posterior mean matrices") {
  std::vector<TraceRecord> trace;
  for (double v : {0.8, 0.9, 1.0}) {
    Eigen::MatrixXd p(2, 2);
    p << 0.5, 0.5, v, 1.0 - v;
    trace.push_back(record_with_p(p));
  }
  CHECK(boi(trace, 1, {0}) == doctest::Approx(0.9));
  const auto mean = posterior_mean_matrix(trace);
  CHECK(mean(1, 0) == doctest::Approx(0.9));
  for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(mean.row(j).sum() - 1.0) <= 1e-10);
  CHECK(posterior_mean_lambda(trace)(0, 1) == 0.5);

  Eigen::MatrixXd own(3, 3);
  own << 0.998, 0.001, 0.001, 0.001, 0.998, 0.001, 0.001, 0.001, 0.998;
  const std::vector<TraceRecord> diag{record_with_p(own)};
  CHECK(boi(diag, 1, {0, 2}) < 0.01);
  CHECK(posterior_mean_matrix(diag) == own);
  CHECK_THROWS(boi(diag, 1, {1}));

  TraceRecord parametric;
  CHECK_THROWS_AS(boi({parametric}, 0, {}), SchemaError);
}

TEST_CASE("posterior mean theta") {
  std::vector<TraceRecord> trace(2);
  trace[0].theta = {Eigen::Vector2d(1.0, 2.0)};
  trace[1].theta = {Eigen::Vector2d(3.0, 0.0)};
  const auto m = posterior_mean_theta(trace);
  CHECK(m[0][0] == 2.0);
  CHECK(m[0][1] == 1.0);
}

TEST_CASE("hpdi") {
  const auto x = normal_samples(100000, 302);
  const auto h = hpdi(x, 0.95);
  CHECK(std::abs(h.lower + 1.96) < 0.05);
  CHECK(std::abs(h.upper - 1.96) < 0.05);
  std::size_t inside = 0;
  for (double v : x) inside += v >= h.lower && v <= h.upper;
  CHECK(double(inside) >= 0.95 * double(x.size()));
  CHECK(hpdi(x, 0.5).width() <= h.width());
  CHECK(hpdi(x, 0.8).width() <= hpdi(x, 0.9).width());

  const std::vector<double> point(200, 1.25);
  const auto p = hpdi(point, 0.95);
  CHECK(p.lower == 1.25);
  CHECK(p.width() == 0.0);
  CHECK_THROWS_AS(hpdi(std::vector<double>(99, 0.0), 0.95), InsufficientSamplesError);
}

TEST_CASE("kde against the true normal density") {
  const auto x = normal_samples(100000, 303);
  const auto k = kde(x);
  CHECK(integrate(k) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(k.bandwidth == doctest::Approx(silverman_bandwidth(x)));
  const auto on = kde(x, GridSpec{-3, 3, 121});
  double worst = 0.0;
  for (std::size_t g = 0; g < on.grid.size(); ++g) {
    const double t = on.grid[g];
    worst = std::max(worst, std::abs(on.density[g] - std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi)));
  }
  CHECK(worst < 0.02);
  CHECK(count_modes(k) == 1);
}

TEST_CASE("kde of two identical samples is one bump") {
  const std::vector<double> x{0.7, 0.7};
  const auto k = kde(x);
  CHECK(count_modes(k) == 1);
  std::size_t arg = 0;
  for (std::size_t g = 1; g < k.density.size(); ++g) {
    if (k.density[g] > k.density[arg]) arg = g;
  }
  CHECK(std::abs(k.grid[arg] - 0.7) <= k.grid[1] - k.grid[0]);
  CHECK(integrate(k) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("kde mode count follows a bimodal slice-sampled posterior") {
  auto logf = [](double x) { return -(x * x - 1) * (x * x - 1) / 0.02; };
  UnnormalizedLogDensity target{logf, {-3, 3}};
  Rng rng(304);
  std::vector<double> x(20000);
  double cur = 1.0;
  for (auto& v : x) v = cur = slice_sample_1d(target, cur, 6.0, 16, rng);
  // Histogram oracle: count local maxima of a 30-bin histogram above 1% of its peak.
  std::vector<double> hist(30, 0.0);
  for (double v : x) hist[std::min<std::size_t>(29, std::size_t((v + 3) / 0.2))] += 1;
  const double peak = *std::max_element(hist.begin(), hist.end());
  std::size_t hist_modes = 0;
  for (std::size_t b = 1; b + 1 < hist.size(); ++b) {
    if (hist[b] > hist[b - 1] && hist[b] >= hist[b + 1] && hist[b] > 0.01 * peak) ++hist_modes;
  }
  CHECK(hist_modes == 2);
  CHECK(count_modes(kde(x)) == hist_modes);
}

TEST_CASE("pare table") {
  MultiSeries data;
  Series s;
  s.observations = {0.1, 0.2};
  s.truth = SeriesTruth{quadratic_map(1.65), NoiseMixtureSpec::make({1.0}, {1e-4}), 0.5};
  data.series.push_back(s);
  TraceRecord r;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(6);
  theta << 1.0, 0.0, -1.65, 0.0, 0.0, 0.0;
  r.theta = {theta};
  auto table = pare_table({r}, data);
  REQUIRE(table.rows.size() == 1);
  REQUIRE(table.rows[0].size() == 6);
  for (double v : table.rows[0]) CHECK(v == 0.0);
  CHECK(table.row_means[0] == 0.0);

  r.theta[0][0] = 1.01;
  r.theta[0][5] = 0.004;
  table = pare_table({r}, data);
  CHECK(table.rows[0][0] == doctest::Approx(1.0));
  CHECK(table.rows[0][5] == doctest::Approx(0.4));
  CHECK(table.row_means[0] == doctest::Approx(1.4 / 6.0));

  data.series[0].truth.reset();
  CHECK_THROWS_AS(pare_table({r}, data), TruthUnavailableError);
}

}  // TEST_SUITE

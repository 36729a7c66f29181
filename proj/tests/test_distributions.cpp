#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "pdgsbr/distributions.hpp"
#include "pdgsbr/errors.hpp"
#include "support.hpp"

using namespace pdgsbr;
using testsupport::moments;

namespace {

constexpr std::size_t kDraws = 100000;

std::vector<double> draws(const std::function<double(Rng&)>& f, std::uint64_t seed,
                          std::size_t n = kDraws) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = f(rng);
  return x;
}

double chi_square_p(const std::vector<double>& observed, const std::vector<double>& prob) {
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  double stat = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    const double e = n * prob[k];
    stat += (observed[k] - e) * (observed[k] - e) / e;
  }
  const boost::math::chi_squared chi(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(chi, stat));
}

}  // namespace

TEST_SUITE("distributions") {

TEST_CASE("gamma: exponential special case has mean 1") {
  const auto x = draws([](Rng& r) { return draw_gamma(1.0, 1.0, r); }, 11);
  CHECK(std::abs(moments(x).mean - 1.0) < 3.0 / std::sqrt(double(kDraws)));
}

TEST_CASE("gamma: tiny shape and rate give positive finite draws") {
  const auto x = draws([](Rng& r) { return draw_gamma(1e-3, 1e-3, r); }, 12);
  for (double v : x) {
    REQUIRE(v > 0.0);
    REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("gamma: variance of shape 2 rate 4 matches quadrature") {
  // Moments of x e^{-4x} by trapezoid integration on [0, 20].
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  const double h = 1e-4;
  for (double t = 0.0; t < 20.0; t += h) {
    auto f = [](double u) { return u * std::exp(-4.0 * u); };
    const double a = f(t), b = f(t + h);
    z += 0.5 * h * (a + b);
    m1 += 0.5 * h * (t * a + (t + h) * b);
    m2 += 0.5 * h * (t * t * a + (t + h) * (t + h) * b);
  }
  const double var_oracle = m2 / z - (m1 / z) * (m1 / z);
  CHECK(var_oracle == doctest::Approx(0.125).epsilon(1e-6));

  const auto x = draws([](Rng& r) { return draw_gamma(2.0, 4.0, r); }, 13);
  CHECK(std::abs(moments(x).var - var_oracle) < 3.0 * testsupport::se_variance(x));
  CHECK(std::abs(moments(x).mean - 0.5) < 3.0 * moments(x).se_mean());
}

TEST_CASE("gamma: non-positive parameters are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(draw_gamma(0.0, 1.0, rng), ParameterDomainError);
  CHECK_THROWS_AS(draw_gamma(1.0, -1.0, rng), ParameterDomainError);
}

TEST_CASE("beta: means for symmetric, uniform and posterior-like parameters") {
  for (auto [a, b, seed] : {std::tuple{0.5, 0.5, 21}, std::tuple{28.5, 32.5, 22}}) {
    const auto x = draws([a = a, b = b](Rng& r) { return draw_beta(a, b, r); }, seed);
    const auto mo = moments(x);
    CHECK(std::abs(mo.mean - a / (a + b)) < 3.0 * mo.se_mean());
  }
  const auto u = draws([](Rng& r) { return draw_beta(1.0, 1.0, r); }, 23);
  CHECK(testsupport::ks_statistic(u, [](double v) { return v; }) < 1.63 / std::sqrt(double(kDraws)));
  Rng rng(1);
  CHECK_THROWS_AS(draw_beta(0.0, 1.0, rng), ParameterDomainError);
}

TEST_CASE("dirichlet: marginal means and exact normalization") {
  struct Case {
    std::vector<double> alpha;
    std::uint64_t seed;
  };
  for (const auto& c : {Case{{10, 1}, 31}, Case{{1, 1}, 32}, Case{{10, 1, 1}, 33}}) {
    Rng rng(c.seed);
    const double total = std::accumulate(c.alpha.begin(), c.alpha.end(), 0.0);
    std::vector<std::vector<double>> comp(c.alpha.size());
    for (std::size_t t = 0; t < kDraws; ++t) {
      const auto p = draw_dirichlet(c.alpha, rng);
      double s = 0.0;
      for (std::size_t l = 0; l < p.size(); ++l) {
        REQUIRE(p[l] > 0.0);
        s += p[l];
        comp[l].push_back(p[l]);
      }
      REQUIRE(std::abs(s - 1.0) <= 1e-12);
    }
    for (std::size_t l = 0; l < c.alpha.size(); ++l) {
      const auto mo = moments(comp[l]);
      CHECK(std::abs(mo.mean - c.alpha[l] / total) < 3.0 * mo.se_mean());
    }
  }
  Rng rng(1);
  CHECK_THROWS_AS(draw_dirichlet(std::vector<double>{}, rng), ParameterDomainError);
  CHECK_THROWS_AS(draw_dirichlet(std::vector<double>{1.0, 0.0}, rng), ParameterDomainError);
}

TEST_CASE("categorical: point mass, fair coin, 1:10 odds") {
  Rng rng(41);
  const std::vector<double> point{0, 5, 0};
  for (int t = 0; t < 1000; ++t) REQUIRE(draw_categorical(point, rng) == 1);

  const std::vector<double> coin{1, 1}, odds{1, 10};
  double c0 = 0, c1 = 0;
  for (std::size_t t = 0; t < kDraws; ++t) {
    c0 += draw_categorical(coin, rng) == 0;
    c1 += draw_categorical(odds, rng) == 1;
  }
  const double n = kDraws;
  CHECK(std::abs(c0 / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
  const double q = 10.0 / 11.0;
  CHECK(std::abs(c1 / n - q) < 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST_CASE("categorical: degenerate weights are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(draw_categorical(std::vector<double>{0, 0}, rng), DegenerateWeightsError);
  CHECK_THROWS_AS(draw_categorical(std::vector<double>{1, -1}, rng), DegenerateWeightsError);
  CHECK_THROWS_AS(draw_categorical(std::vector<double>{1, std::nan("")}, rng), DegenerateWeightsError);
}

TEST_CASE("categorical: scale invariance by chi-square") {
  const std::vector<double> w{0.2, 1.5, 3.0, 0.3};
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<double> prob;
  for (double v : w) prob.push_back(v / total);
  for (double c : {1e-200, 1.0, 1e200}) {
    std::vector<double> scaled;
    for (double v : w) scaled.push_back(c * v);
    Rng rng(42);
    std::vector<double> counts(w.size(), 0.0);
    for (std::size_t t = 0; t < kDraws; ++t) counts[draw_categorical(scaled, rng)] += 1.0;
    CHECK(chi_square_p(counts, prob) > 0.001);
  }
}

TEST_CASE("categorical: log weights survive underflow") {
  Rng rng(43);
  const std::vector<double> lw{-2000.0, -2000.0 + std::log(3.0), -std::numeric_limits<double>::infinity()};
  double c1 = 0;
  for (std::size_t t = 0; t < kDraws; ++t) {
    const auto k = draw_categorical_log(lw, rng);
    REQUIRE(k < 2);
    c1 += k == 1;
  }
  CHECK(std::abs(c1 / kDraws - 0.75) < 3.0 * std::sqrt(0.75 * 0.25 / kDraws));
}

TEST_CASE("truncated geometric: enumeration, near-degenerate and shifted mean") {
  Rng rng(51);
  double c2 = 0, c3 = 0;
  for (std::size_t t = 0; t < kDraws; ++t) {
    const auto n = draw_truncated_geometric(0.5, 2, rng);
    REQUIRE(n >= 2);
    c2 += n == 2;
    c3 += n == 3;
  }
  CHECK(std::abs(c2 / kDraws - 0.5) < 3.0 * std::sqrt(0.25 / kDraws));
  CHECK(std::abs(c3 / kDraws - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / kDraws));

  double ones = 0;
  for (std::size_t t = 0; t < kDraws; ++t) ones += draw_truncated_geometric(0.999, 1, rng) == 1;
  CHECK(ones / kDraws > 0.995);

  const auto x = draws([](Rng& r) { return double(draw_truncated_geometric(0.3, 5, r)); }, 52);
  const auto mo = moments(x);
  CHECK(std::abs(mo.mean - (5.0 + 0.7 / 0.3)) < 3.0 * mo.se_mean());

  CHECK_THROWS_AS(draw_truncated_geometric(0.0, 1, rng), ParameterDomainError);
  CHECK_THROWS_AS(draw_truncated_geometric(1.0, 1, rng), ParameterDomainError);
}

TEST_CASE("slice: Gaussian target moments within autocorrelation-adjusted error") {
  UnnormalizedLogDensity target{[](double x) { return -2.0 * (x - 0.5) * (x - 0.5); }, {-10, 10}};
  Rng rng(61);
  std::vector<double> x(kDraws);
  double cur = 0.0;
  for (auto& v : x) v = cur = slice_sample_1d(target, cur, 0.25, 16, rng);
  const auto mo = moments(x);
  const double tau = testsupport::autocorrelation_time(x);
  CHECK(std::abs(mo.mean - 0.5) < 3.0 * mo.se_mean() * std::sqrt(tau));
  CHECK(std::abs(mo.var - 0.25) < 3.0 * testsupport::se_variance(x) * std::sqrt(tau));
}

TEST_CASE("slice: flat target is uniform") {
  UnnormalizedLogDensity target{[](double) { return 0.0; }, {0, 1}};
  Rng rng(62);
  std::vector<double> x(kDraws);
  double cur = 0.5;
  for (auto& v : x) {
    v = cur = slice_sample_1d(target, cur, 0.25, 16, rng);
    REQUIRE(target.support.contains(v));
  }
  // Successive draws are dependent; a thinned subsample is close to i.i.d.
  std::vector<double> thin;
  for (std::size_t i = 0; i < x.size(); i += 10) thin.push_back(x[i]);
  CHECK(testsupport::ks_statistic(thin, [](double v) { return v; }) <
        1.63 / std::sqrt(double(thin.size())));
}

TEST_CASE("slice: bimodal target visits both modes in equal proportion") {
  auto logf = [](double x) { return -(x * x - 1) * (x * x - 1) / 0.02; };
  UnnormalizedLogDensity target{logf, {-3, 3}};
  const auto mass = testsupport::quadrature_cell_masses(logf, -3, 0, 1);
  CHECK(mass[0] == doctest::Approx(1.0));
  Rng rng(63);
  double left = 0, right = 0, cur = 1.0;
  for (std::size_t t = 0; t < kDraws; ++t) {
    cur = slice_sample_1d(target, cur, 6.0, 16, rng);
    (cur < 0 ? left : right) += 1;
  }
  REQUIRE(left > 0);
  REQUIRE(right > 0);
  CHECK(std::abs(left / right - 1.0) < 0.1);
}

TEST_CASE("slice: histogram matches quadrature on a discretizable target") {
  auto logf = [](double x) { return -std::pow(x * x * x - x, 2) * 4.0 + 0.3 * x; };
  const Interval sup{-2, 2};
  UnnormalizedLogDensity target{logf, sup};
  Rng rng(64);
  std::vector<double> x(1000000);
  double cur = 0.0;
  for (auto& v : x) v = cur = slice_sample_1d(target, cur, 2.0, 16, rng);
  const auto cells = testsupport::quadrature_cell_masses(logf, sup.lo, sup.hi, 40);
  CHECK(testsupport::total_variation(x, cells, sup.lo, sup.hi) < 0.02);
}

TEST_CASE("slice: invalid inputs") {
  Rng rng(1);
  UnnormalizedLogDensity target{[](double x) { return x > 0 ? 0.0 : -std::numeric_limits<double>::infinity(); },
                                {-1, 1}};
  CHECK_THROWS_AS(slice_sample_1d(target, -0.5, 0.25, 16, rng), InvalidStateError);
  CHECK_THROWS_AS(slice_sample_1d(target, 0.5, 0.0, 16, rng), ParameterDomainError);
}

TEST_CASE("determinism: equal RNG states give equal draws, state round-trips") {
  Rng a(77), b(77);
  for (int t = 0; t < 100; ++t) {
    REQUIRE(draw_gamma(0.7, 2.0, a) == draw_gamma(0.7, 2.0, b));
    REQUIRE(draw_beta(0.5, 0.5, a) == draw_beta(0.5, 0.5, b));
  }
  const std::string saved = a.state();
  const double next = a.normal();
  Rng c(1);
  c.restore(saved);
  CHECK(c.normal() == next);
  CHECK(c.seed() == 77);
}

}  // TEST_SUITE

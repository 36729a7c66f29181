#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/errors.hpp"
#include "support.hpp"

using namespace pdgsbr;
using testsupport::moments;

TEST_SUITE("dynamics") {

TEST_CASE("eval_map: quadratic, cubic and constant term") {
  CHECK(eval_map(quadratic_map(1.65), 1.0) == doctest::Approx(-0.65).epsilon(1e-15));
  CHECK(eval_map(cubic_map(2.55), 1.0) == doctest::Approx(1.61).epsilon(1e-15));
  const PolynomialMap quintic{{0.3, -1, 2, 0.5, 0.1, -0.2}};
  CHECK(eval_map(quintic, 0.0) == 0.3);
  // Horner agrees with the power sum.
  const double x = -0.7;
  double direct = 0.0;
  for (std::size_t r = 0; r < quintic.coefficients.size(); ++r) {
    direct += quintic.coefficients[r] * std::pow(x, double(r));
  }
  CHECK(eval_map(quintic, x) == doctest::Approx(direct).epsilon(1e-14));
}

TEST_CASE("padded coefficients") {
  const auto q = quadratic_map(1.65).padded(5);
  REQUIRE(q.size() == 6);
  CHECK(q[0] == 1.0);
  CHECK(q[2] == -1.65);
  CHECK(q[5] == 0.0);
}

TEST_CASE("noise mixture: construction invariants") {
  CHECK_THROWS_AS(NoiseMixtureSpec::make({0.5, 0.4}, {1, 1}), ConfigError);
  CHECK_THROWS_AS(NoiseMixtureSpec::make({1.0}, {0.0}), ConfigError);
  CHECK_THROWS_AS(NoiseMixtureSpec::make({1.0}, {1.0, 2.0}), ConfigError);
  const auto spec = NoiseMixtureSpec::make({0.6, 0.4}, {3e-3, 0.3});
  CHECK(spec.variance() == doctest::Approx(0.1218));
}

TEST_CASE("sample_noise: moments of the experiment components") {
  SUBCASE("single narrow component") {
    const auto spec = NoiseMixtureSpec::make({1.0}, {1e-6});
    Rng rng(101);
    std::vector<double> z(100000);
    for (auto& v : z) v = sample_noise(spec, rng);
    const double sd = std::sqrt(moments(z).var);
    // sd of the sample sd is about sigma / sqrt(2n).
    CHECK(std::abs(sd - 1e-3) < 3.0 * 1e-3 / std::sqrt(2.0 * z.size()));
  }
  SUBCASE("two-component variance") {
    const auto spec = NoiseMixtureSpec::make({0.6, 0.4}, {3e-3, 0.3});
    Rng rng(102);
    std::vector<double> z(100000);
    for (auto& v : z) v = sample_noise(spec, rng);
    CHECK(std::abs(moments(z).var - 0.1218) < 3.0 * testsupport::se_variance(z));
  }
  SUBCASE("heavy tails") {
    const auto spec = NoiseMixtureSpec::make({0.9, 0.1}, {1e-6, 0.04});
    Rng rng(103);
    std::vector<double> z(100000);
    for (auto& v : z) v = sample_noise(spec, rng);
    const auto mo = moments(z);
    double m4 = 0.0;
    for (double v : z) m4 += std::pow(v - mo.mean, 4);
    m4 /= double(z.size());
    CHECK(m4 / (mo.var * mo.var) > 10.0);
  }
}

TEST_CASE("sample_noise: zero mean for every spec") {
  std::uint64_t seed = 110;
  for (const auto& spec : {NoiseMixtureSpec::make({1.0}, {1e-6}), NoiseMixtureSpec::make({0.6, 0.4}, {3e-3, 0.3}),
                           NoiseMixtureSpec::make({0.9, 0.1}, {1e-6, 0.04})}) {
    Rng rng(seed++);
    std::vector<double> z(1000000);
    for (auto& v : z) v = sample_noise(spec, rng);
    const auto mo = moments(z);
    CHECK(std::abs(mo.mean) < 3.0 * mo.se_mean());
  }
}

TEST_CASE("simulate_series: deterministic limit of Q_1") {
  const auto tiny = NoiseMixtureSpec::make({1.0}, {1e-30});
  Rng rng(1);
  const auto s = simulate_series(quadratic_map(1.65), tiny, 2, 1.0, 0, rng);
  REQUIRE(s.observations.size() == 2);
  CHECK(std::abs(s.observations[0] - -0.65) < 1e-6);
  CHECK(std::abs(s.observations[1] - 0.302875) < 1e-6);
  CHECK(s.held_out.empty());
}

TEST_CASE("simulate_series: zero-noise orbit over 50 steps") {
  const auto tiny = NoiseMixtureSpec::make({1.0}, {1e-30});
  for (const auto& map : {quadratic_map(0.5), quadratic_map(1.3), cubic_map(1.0)}) {
    Rng rng(2);
    const auto s = simulate_series(map, tiny, 50, 0.5, 0, rng);
    const auto det = testsupport::orbit(map, 0.5, 50);
    for (std::size_t i = 0; i < 50; ++i) {
      REQUIRE(std::abs(det[i]) <= 2.0);
      CHECK(std::abs(s.observations[i] - det[i]) < 1e-6);
    }
  }
}

TEST_CASE("simulate_series: held-out value continues the recursion") {
  const auto spec = NoiseMixtureSpec::make({1.0}, {1e-4});
  Rng a(5), b(5);
  const auto s = simulate_series(quadratic_map(1.65), spec, 10, 1.0, 1, a);
  REQUIRE(s.held_out.size() == 1);
  // Replay the stream by hand: observation draws then one fresh draw.
  double x = 1.0;
  for (int i = 0; i < 10; ++i) x = eval_map(quadratic_map(1.65), x) + sample_noise(spec, b);
  CHECK(s.observations.back() == x);
  CHECK(s.held_out[0] == eval_map(quadratic_map(1.65), x) + sample_noise(spec, b));
}

TEST_CASE("simulate_series: bit-reproducible and divergent seeds are reported") {
  const auto spec = NoiseMixtureSpec::make({1.0}, {0.0485});
  Rng a(9), b(9);
  try {
    const auto s1 = simulate_series(quadratic_map(1.65), spec, 200, 1.0, 0, a);
    const auto s2 = simulate_series(quadratic_map(1.65), spec, 200, 1.0, 0, b);
    CHECK(s1.observations == s2.observations);
  } catch (const DivergenceError&) {
  }
  int diverged = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    Rng rng(seed);
    try {
      simulate_series(quadratic_map(1.65), spec, 200, 1.0, 0, rng);
    } catch (const DivergenceError& e) {
      CHECK(e.index() < 200);
      ++diverged;
    }
  }
  MESSAGE("diverged seeds: " << diverged << " / 200");
  CHECK(diverged >= 10);
}

TEST_CASE("simulate_multi: shared components and degenerate m = 1") {
  const auto m11 = std::make_shared<const NoiseMixtureSpec>(NoiseMixtureSpec::make({1.0}, {1e-6}));
  const auto m12 =
      std::make_shared<const NoiseMixtureSpec>(NoiseMixtureSpec::make({0.6, 0.4}, {3e-3, 0.3}));
  std::vector<SeriesSpec> specs{
      {cubic_map(2.55), {{0.25, m11}, {0.75, m12}}, 200, 1.0, 1},
      {quadratic_map(1.65), {{1.0, m12}}, 50, 1.0, 1},
  };
  Rng rng(2344);
  SimulateOptions keep;
  keep.keep_escaped_prefix = true;
  const auto data = simulate_multi(specs, rng, keep);
  REQUIRE(data.m() == 2);
  CHECK(data.series[0].n() == 200);
  CHECK(data.has_truth());
  CHECK(data.series[0].truth->noise.variance() == doctest::Approx(0.25 * 1e-6 + 0.75 * 0.1218));
  CHECK(data.series[1].truth->noise.variance() == doctest::Approx(0.1218));

  const auto single = NoiseMixtureSpec::make({1.0}, {1e-4});
  const auto shared = std::make_shared<const NoiseMixtureSpec>(single);
  Rng r1(3), r2(3);
  const auto multi = simulate_multi({{quadratic_map(1.65), {{1.0, shared}}, 30, 0.5, 1}}, r1);
  const auto one = simulate_series(quadratic_map(1.65), single, 30, 0.5, 1, r2);
  CHECK(multi.series[0].observations == one.observations);
  CHECK(multi.series[0].held_out == one.held_out);
}

TEST_CASE("compound_noise drops zero-selection terms") {
  const auto a = std::make_shared<const NoiseMixtureSpec>(NoiseMixtureSpec::make({1.0}, {1e-6}));
  const auto b = std::make_shared<const NoiseMixtureSpec>(NoiseMixtureSpec::make({0.5, 0.5}, {1.0, 2.0}));
  const auto mix = compound_noise({{0.0, a}, {1.0, b}});
  CHECK(mix.weights().size() == 2);
  CHECK(mix.variance() == doctest::Approx(1.5));
}

TEST_CASE("detect_escape") {
  const auto r = detect_escape({0.5, -0.9, 1.3}, 1.11);
  CHECK(r.escaped);
  CHECK(r.escape_index == std::optional<std::size_t>(2));
  const auto inside = detect_escape({0.5, -1.1, 1.0}, 1.11);
  CHECK_FALSE(inside.escaped);
  CHECK_FALSE(inside.escape_index.has_value());
  CHECK(detect_escape({2.0, 0.0}, 1.11).escape_index == std::optional<std::size_t>(0));
}

TEST_CASE("MultiSeries validation") {
  MultiSeries d;
  d.series.push_back(testsupport::make_series({1.0}));
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.series[0].observations = {1.0, std::nan("")};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d.series[0].observations = {1.0, 2.0};
  CHECK_NOTHROW(d.validate());
}

}  // TEST_SUITE

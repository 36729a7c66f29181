#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pdgsbr {

/// Seeded generator owned by exactly one chain. All variates in this library
/// are built from raw 64-bit words of a std::mt19937_64, whose output sequence
/// is fixed by the standard, so a given seed yields the same draws on every
/// conforming platform. The full engine state round-trips through text.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 5489u) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();
  /// Standard normal (Box-Muller, no cached second value).
  double normal();

  std::string state() const;
  void restore(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double x) const { return x >= lo && x <= hi; }
  double length() const { return hi - lo; }
};

/// Log of an unnormalized density restricted to a closed interval.
struct UnnormalizedLogDensity {
  std::function<double(double)> evaluator;
  Interval support;

  double operator()(double x) const;
};

double draw_gamma(double shape, double rate, Rng& rng);
double draw_beta(double a, double b, Rng& rng);
std::vector<double> draw_dirichlet(std::span<const double> alpha, Rng& rng);
double draw_normal(double mean, double sd, Rng& rng);

/// Index drawn with probability weights[k] / sum(weights).
std::size_t draw_categorical(std::span<const double> weights, Rng& rng);

/// Same as draw_categorical but from log weights; the maximum is subtracted
/// before exponentiation so arbitrarily small weights never underflow to an
/// all-zero vector. Entries equal to -inf are excluded.
std::size_t draw_categorical_log(std::span<const double> log_weights, Rng& rng);

/// N >= min_value with P{N = r} = lambda (1 - lambda)^(r - min_value).
std::int64_t draw_truncated_geometric(double lambda, std::int64_t min_value, Rng& rng);

/// One stepping-out / shrinkage slice transition (Neal 2003) of the target,
/// with at most `max_stepout` unit steps on each side, clipped to the support.
double slice_sample_1d(const UnnormalizedLogDensity& target, double current, double width,
                       int max_stepout, Rng& rng);

}  // namespace pdgsbr

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/gibbs.hpp"
#include "pdgsbr/model.hpp"

namespace pdgsbr {

/// Synthetic data recipe: x_j ~ g_j + sum_l p_{jl} M_{jl}.
struct SyntheticSpec {
  std::uint64_t seed = 1;
  std::vector<std::string> names;
  std::vector<SeriesSpec> series;
  /// Escape bound reported per series after simulation; 0 disables the report.
  double escape_bound = 0.0;
};

struct BoiSpec {
  std::string name;
  std::size_t series = 0;               // zero-based
  std::vector<std::size_t> donors;      // zero-based
};

struct OutputsConfig {
  double hpdi_mass = 0.95;
  std::size_t kde_points = 512;
  /// Noise-predictive draws kept for the noise KDEs: those inside the
  /// shortest window holding this fraction of the draws.
  double noise_kde_coverage = 0.9;
  /// Fixed window for the noise KDEs; overrides the coverage rule.
  std::optional<Interval> noise_grid;
  std::vector<BoiSpec> boi;
  /// Series whose first out-of-sample HPDI is compared by reproduce.
  std::optional<std::size_t> hpdi_focus;
};

struct ExperimentConfig {
  std::string name;
  std::filesystem::path source;         // file the config was read from
  std::string text;                     // verbatim document
  std::optional<std::filesystem::path> data_file;
  std::optional<SyntheticSpec> synthetic;

  PriorConfig prior;                    // dirichlet_alpha set from the selected variant
  std::string dirichlet;                // selected variant
  std::map<std::string, Eigen::MatrixXd> dirichlet_variants;

  GibbsConfig sampler;
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> scales;  // iterations, burn-in

  OutputsConfig outputs;

  std::size_t m() const { return prior.m; }
  /// Replaces the Dirichlet hyperparameters by a named variant.
  void select_dirichlet(const std::string& variant);
  /// Applies a named iteration scale.
  void select_scale(const std::string& scale);
};

/// Parses a YAML document. `source` anchors relative data paths.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& source = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Location of a bundled experiment config ("4A", "4B", "4C", "smoke").
std::filesystem::path bundled_config(const std::string& id);

/// Checks cross-block consistency (m, selection rows, variants) against the
/// data's m. Throws ConfigError.
void validate_against(const ExperimentConfig& cfg, std::size_t data_m);

/// Simulates the synthetic block with its own data seed.
MultiSeries simulate_config(const ExperimentConfig& cfg, bool allow_escape);

/// Lowercase hex SHA-256 of `text`.
std::string sha256_hex(const std::string& text);

}  // namespace pdgsbr

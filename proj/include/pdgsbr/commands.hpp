#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdgsbr/config.hpp"
#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/gibbs.hpp"

namespace pdgsbr {

/// Command-line overrides applied on top of a config; recorded in the manifest.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<SamplerKind> sampler;
  std::optional<std::string> scale;
  std::optional<std::string> prior;  // Dirichlet variant
  bool allow_escape = false;

  nlohmann::json to_json() const;
  static Overrides from_json(const nlohmann::json& j);
};

/// Loads a YAML config, or the config embedded in a run manifest (in which
/// case the manifest's overrides are returned through `manifest_overrides`).
ExperimentConfig load_config_or_manifest(const std::filesystem::path& path,
                                         std::optional<Overrides>* manifest_overrides = nullptr);

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov);

/// Writes data.json and series_<j>.csv into `out`; returns the data.
MultiSeries cmd_simulate(const std::filesystem::path& config, const Overrides& ov,
                         const std::filesystem::path& out, std::ostream& log);

struct RunOptions {
  std::filesystem::path config;             // YAML config or manifest.json
  std::filesystem::path out;
  Overrides overrides;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> resume;
  std::ostream* progress = nullptr;
};

struct RunResult {
  ExperimentConfig config;
  MultiSeries data;
  std::vector<TraceRecord> trace;
};

/// Writes data.json, trace.csv, trace.jsonl, checkpoint.json and manifest.json
/// into options.out. Replaying the manifest reproduces all five byte for byte.
RunResult cmd_run(const RunOptions& options);

struct ReportOptions {
  std::filesystem::path trace;              // trace.jsonl or a run directory
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
};

/// Writes the diagnostics files into options.out and returns report.json.
nlohmann::json cmd_report(const ReportOptions& options);

/// simulate, weak run, strong run and both reports for a bundled experiment;
/// prints the comparison table and returns comparison.json.
nlohmann::json cmd_reproduce(const std::string& id, const std::string& scale,
                             const std::filesystem::path& out, std::ostream& log,
                             std::ostream* progress = nullptr);

/// Maps an exception to the documented exit codes (2 config, 3 numeric, 4 I/O).
int exit_code_for(const std::exception& e);

}  // namespace pdgsbr

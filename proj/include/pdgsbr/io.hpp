#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdgsbr/dynamics.hpp"
#include "pdgsbr/gibbs.hpp"
#include "pdgsbr/model.hpp"

namespace pdgsbr {

/// printf("%.17g"): enough digits to round-trip every double.
std::string format_double(double x);

nlohmann::json to_json(const MultiSeries& data);
MultiSeries multiseries_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ChainState& state);
ChainState chain_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TraceRecord& rec);
TraceRecord trace_record_from_json(const nlohmann::json& j);

/// Column names of the trace CSV, in order:
///   iteration, theta_<j>_<r>, p_<j>_<l>, lambda_<j>_<l> (j <= l), x0_<j>,
///   future_<j>_<k>, noise_<j>, atoms_<j>_<l> (j <= l), tau
/// Series are numbered from 1 and coefficient indices r from 0. p, lambda and
/// atoms columns are absent for the parametric sampler, tau for the others.
std::vector<std::string> trace_csv_header(const TraceRecord& first);
std::string trace_csv_row(const TraceRecord& rec);

/// Writes one CSV per series (columns: index, value) with held-out values
/// flagged in a third column.
void write_series_csv(const std::filesystem::path& path, const Series& series);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

std::vector<TraceRecord> read_trace_jsonl(const std::filesystem::path& path);

}  // namespace pdgsbr

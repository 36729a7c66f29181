#include "pdgsbr/commands.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>

#include "pdgsbr/diagnostics.hpp"
#include "pdgsbr/errors.hpp"
#include "pdgsbr/io.hpp"

#ifndef PDGSBR_VERSION
#define PDGSBR_VERSION "0.0.0"
#endif

namespace pdgsbr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string dump_data(const MultiSeries& data) { return to_json(data).dump(2) + "\n"; }

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

std::string series_label(const ExperimentConfig* cfg, std::size_t j) {
  if (cfg && cfg->synthetic && j < cfg->synthetic->names.size()) return cfg->synthetic->names[j];
  return "series_" + std::to_string(j + 1);
}

void write_kde(const fs::path& path, const KdeGrid& grid) {
  std::string out = "grid,density\n";
  for (std::size_t g = 0; g < grid.grid.size(); ++g) {
    out += format_double(grid.grid[g]) + "," + format_double(grid.density[g]) + "\n";
  }
  write_text(path, out);
}

// Central `coverage` fraction of the draws; noise predictives carry rare
// draws from near-zero prior precisions that would stretch the grid.
// Draws inside the fixed window, or inside the shortest window holding
// `coverage` of them.
std::vector<double> noise_window(const std::vector<double>& xs, const OutputsConfig& outputs) {
  Interval window{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  if (outputs.noise_grid) {
    window = *outputs.noise_grid;
  } else if (outputs.noise_kde_coverage < 1.0 && xs.size() >= 100) {
    const Hpdi h = hpdi(xs, outputs.noise_kde_coverage);
    window = {h.lower, h.upper};
  }
  std::vector<double> kept;
  for (double x : xs) {
    if (window.contains(x)) kept.push_back(x);
  }
  return kept;
}

json hpdi_entry(const std::vector<double>& xs, double mass, std::size_t modes) {
  if (xs.size() < 100) return {{"error", "insufficient samples"}, {"samples", xs.size()}};
  const Hpdi h = hpdi(xs, mass);
  return {{"lower", h.lower}, {"upper", h.upper}, {"width", h.width()}, {"modes", modes},
          {"multimodal", modes > 1}};
}

}  // namespace

json Overrides::to_json() const {
  json j = json::object();
  if (seed) j["seed"] = *seed;
  if (sampler) j["sampler"] = to_string(*sampler);
  if (scale) j["scale"] = *scale;
  if (prior) j["prior"] = *prior;
  if (allow_escape) j["allow_escape"] = true;
  return j;
}

Overrides Overrides::from_json(const json& j) {
  Overrides ov;
  if (j.contains("seed")) ov.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("sampler")) ov.sampler = sampler_kind_from_string(j.at("sampler").get<std::string>());
  if (j.contains("scale")) ov.scale = j.at("scale").get<std::string>();
  if (j.contains("prior")) ov.prior = j.at("prior").get<std::string>();
  if (j.contains("allow_escape")) ov.allow_escape = j.at("allow_escape").get<bool>();
  return ov;
}

ExperimentConfig load_config_or_manifest(const fs::path& path, std::optional<Overrides>* manifest_overrides) {
  if (path.extension() == ".json") {
    const json manifest = read_json(path);
    if (!manifest.contains("config")) throw ConfigError(path.string() + " is not a run manifest");
    ExperimentConfig cfg = parse_config(manifest.at("config").get<std::string>(), path);
    if (manifest_overrides) *manifest_overrides = Overrides::from_json(manifest.value("overrides", json::object()));
    return cfg;
  }
  return load_config(path);
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.scale) cfg.select_scale(*ov.scale);
  if (ov.prior) cfg.select_dirichlet(*ov.prior);
  if (ov.seed) cfg.sampler.seed = *ov.seed;
  if (ov.sampler) cfg.sampler.kind = *ov.sampler;
  cfg.sampler.validate();
}

MultiSeries cmd_simulate(const fs::path& config, const Overrides& ov, const fs::path& out, std::ostream& log) {
  ExperimentConfig cfg = load_config_or_manifest(config);
  if (!cfg.synthetic) throw ConfigError("simulate needs a synthetic data block");
  if (ov.seed) cfg.synthetic->seed = *ov.seed;
  const MultiSeries data = simulate_config(cfg, ov.allow_escape);

  ensure_dir(out);
  write_text(out / "data.json", dump_data(data));
  for (std::size_t j = 0; j < data.m(); ++j) {
    write_series_csv(out / ("series_" + std::to_string(j + 1) + ".csv"), data.series[j]);
  }

  log << "simulated " << cfg.name << " with data seed " << cfg.synthetic->seed << "\n";
  for (std::size_t j = 0; j < data.m(); ++j) {
    const auto& s = data.series[j];
    log << "  " << series_label(&cfg, j) << ": n = " << s.n() << ", x0 = " << s.truth->x0 << ", map =";
    for (double c : s.truth->map.coefficients) log << " " << c;
    log << ", noise variance = " << s.truth->noise.variance();
    if (cfg.synthetic->escape_bound > 0.0) {
      const auto esc = detect_escape(s.observations, cfg.synthetic->escape_bound);
      if (esc.escaped) log << ", leaves [-b, b] at i = " << *esc.escape_index + 1;
    }
    if (s.n() < cfg.synthetic->series[j].n) log << " (escaped prefix kept)";
    log << "\n";
  }
  return data;
}

RunResult cmd_run(const RunOptions& options) {
  std::optional<Overrides> from_manifest;
  ExperimentConfig cfg = load_config_or_manifest(options.config, &from_manifest);
  Overrides ov = from_manifest.value_or(Overrides{});
  const Overrides& cli = options.overrides;
  if (cli.seed) ov.seed = cli.seed;
  if (cli.sampler) ov.sampler = cli.sampler;
  if (cli.scale) ov.scale = cli.scale;
  if (cli.prior) ov.prior = cli.prior;
  ov.allow_escape = ov.allow_escape || cli.allow_escape;
  apply_overrides(cfg, ov);

  // Data origin: explicit path, the replayed run's own copy, the config's
  // file, or simulation from the synthetic block.
  std::string origin;
  MultiSeries data;
  if (options.data) {
    data = multiseries_from_json(read_json(*options.data));
    origin = "file";
  } else if (from_manifest) {
    const json manifest = read_json(options.config);
    origin = manifest.at("data").at("origin").get<std::string>();
    if (origin == "synthetic") {
      data = simulate_config(cfg, ov.allow_escape);
    } else {
      const fs::path sibling = options.config.parent_path() / "data.json";
      const std::string text = read_text(sibling);
      if (sha256_hex(text) != manifest.at("data").at("sha256").get<std::string>()) {
        throw ConfigError(sibling.string() + " does not match the manifest's data hash");
      }
      data = multiseries_from_json(json::parse(text));
    }
  } else if (cfg.data_file) {
    data = multiseries_from_json(read_json(*cfg.data_file));
    origin = "file";
  } else {
    data = simulate_config(cfg, ov.allow_escape);
    origin = "synthetic";
  }
  data.validate();
  validate_against(cfg, data.m());

  ensure_dir(options.out);
  const fs::path cp_path = options.out / "checkpoint.json";

  std::vector<TraceRecord> trace;
  std::optional<Checkpoint> resume;
  if (options.resume) {
    resume = checkpoint_from_json(read_json(*options.resume));
    const fs::path old_trace = options.out / "trace.jsonl";
    if (fs::exists(old_trace)) {
      for (auto& rec : read_trace_jsonl(old_trace)) {
        if (rec.iteration <= resume->state.iteration) trace.push_back(std::move(rec));
      }
    }
  }

  ChainHooks hooks;
  hooks.progress = options.progress;
  hooks.on_checkpoint = [&](const Checkpoint& cp) { write_text(cp_path, to_json(cp).dump() + "\n"); };
  auto fresh = run_chain(data, cfg.prior, cfg.sampler, hooks, resume ? &*resume : nullptr);
  std::move(fresh.begin(), fresh.end(), std::back_inserter(trace));

  const std::string data_text = dump_data(data);
  write_text(options.out / "data.json", data_text);

  std::string csv;
  std::string jsonl;
  if (!trace.empty()) {
    const auto header = trace.front();
    const auto cols = trace_csv_header(header);
    for (std::size_t c = 0; c < cols.size(); ++c) csv += (c ? "," : "") + cols[c];
    csv += "\n";
  }
  for (const auto& rec : trace) {
    csv += trace_csv_row(rec) + "\n";
    jsonl += to_json(rec).dump() + "\n";
  }
  write_text(options.out / "trace.csv", csv);
  write_text(options.out / "trace.jsonl", jsonl);

  json manifest;
  manifest["tool"] = "pdgsbr";
  manifest["version"] = PDGSBR_VERSION;
  manifest["experiment"] = cfg.name;
  manifest["config"] = cfg.text;
  manifest["config_sha256"] = sha256_hex(cfg.text);
  manifest["overrides"] = ov.to_json();
  manifest["effective"] = {{"sampler", to_string(cfg.sampler.kind)},
                           {"seed", cfg.sampler.seed},
                           {"iterations", cfg.sampler.total_iterations},
                           {"burn_in", cfg.sampler.burn_in},
                           {"thin", cfg.sampler.thin},
                           {"dirichlet", cfg.dirichlet},
                           {"dirichlet_alpha", matrix_json(cfg.prior.dirichlet_alpha)}};
  manifest["data"] = {{"origin", origin}, {"sha256", sha256_hex(data_text)}, {"m", data.m()}};
  if (origin == "synthetic") manifest["data"]["seed"] = cfg.synthetic->seed;
  manifest["libraries"] = {
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"compiler", __VERSION__}};
  manifest["outputs"] = json::object();
  for (const char* name : {"data.json", "trace.csv", "trace.jsonl", "checkpoint.json"}) {
    manifest["outputs"][name] = sha256_hex(read_text(options.out / name));
  }
  write_json(options.out / "manifest.json", manifest);

  return {std::move(cfg), std::move(data), std::move(trace)};
}

json cmd_report(const ReportOptions& options) {
  fs::path trace_path = options.trace;
  fs::path run_dir = trace_path.parent_path();
  if (fs::is_directory(trace_path)) {
    run_dir = trace_path;
    trace_path /= "trace.jsonl";
  }
  const fs::path data_path = options.data.value_or(run_dir / "data.json");
  std::optional<ExperimentConfig> cfg;
  if (options.config) {
    cfg = load_config_or_manifest(*options.config);
  } else if (fs::exists(run_dir / "manifest.json")) {
    cfg = load_config_or_manifest(run_dir / "manifest.json");
  }
  const OutputsConfig outputs = cfg ? cfg->outputs : OutputsConfig{};

  const auto trace = read_trace_jsonl(trace_path);
  const MultiSeries data = multiseries_from_json(read_json(data_path));
  if (trace.empty()) throw InsufficientSamplesError("trace " + trace_path.string() + " has no records");
  const std::size_t m = trace.front().theta.size();
  if (m != data.m()) {
    throw SchemaError("trace has m = " + std::to_string(m) + " but data has m = " + std::to_string(data.m()));
  }
  if (cfg && cfg->m() != m) throw SchemaError("config m does not match the trace");
  const bool mixture = trace.front().p.size() > 0;
  const ExperimentConfig* cfgp = cfg ? &*cfg : nullptr;

  ensure_dir(options.out);
  json report;
  report["records"] = trace.size();
  report["m"] = m;
  report["sampler"] = mixture ? (m == 1 ? "mixture" : "pdgsbr") : "parametric";
  if (cfg) report["experiment"] = cfg->name;

  // Control parameters.
  const auto theta_mean = posterior_mean_theta(trace);
  json means = json::object();
  means["theta"] = json::array();
  for (const auto& t : theta_mean) means["theta"].push_back(std::vector<double>(t.data(), t.data() + t.size()));
  if (mixture) {
    means["p"] = matrix_json(posterior_mean_matrix(trace));
    means["lambda"] = matrix_json(posterior_mean_lambda(trace));
    report["posterior_mean_p"] = means["p"];
  } else {
    double tau = 0.0;
    for (const auto& rec : trace) tau += *rec.common_precision;
    means["tau"] = tau / static_cast<double>(trace.size());
  }
  write_json(options.out / "posterior_means.json", means);

  if (data.has_truth()) {
    const PareTable table = pare_table(trace, data);
    std::string csv = "series";
    for (std::size_t r = 0; r < table.rows.front().size(); ++r) csv += ",theta_" + std::to_string(r);
    csv += ",mean\n";
    for (std::size_t j = 0; j < m; ++j) {
      csv += series_label(cfgp, j);
      for (double v : table.rows[j]) csv += "," + format_double(v);
      csv += "," + format_double(table.row_means[j]) + "\n";
    }
    write_text(options.out / "pare_table.csv", csv);
    report["pare"] = table.rows;
    report["mean_pare"] = table.row_means;
  }

  for (std::size_t j = 0; j < m; ++j) {
    const auto dim = static_cast<std::size_t>(theta_mean[j].size());
    std::vector<std::vector<double>> curves(dim);
    for (std::size_t r = 0; r < dim; ++r) {
      std::vector<double> xs;
      xs.reserve(trace.size());
      for (const auto& rec : trace) xs.push_back(rec.theta[j][static_cast<Eigen::Index>(r)]);
      curves[r] = ergodic_average(xs);
    }
    std::string csv = "iteration";
    for (std::size_t r = 0; r < dim; ++r) csv += ",theta_" + std::to_string(j + 1) + "_" + std::to_string(r);
    csv += "\n";
    for (std::size_t t = 0; t < trace.size(); ++t) {
      csv += std::to_string(trace[t].iteration);
      for (std::size_t r = 0; r < dim; ++r) csv += "," + format_double(curves[r][t]);
      csv += "\n";
    }
    write_text(options.out / ("ergodic_theta_" + std::to_string(j + 1) + ".csv"), csv);
  }

  if (mixture && m > 1) {
    std::vector<BoiSpec> specs = outputs.boi;
    if (specs.empty()) {
      BoiSpec def{"BoI_" + std::to_string(m), 1, {}};
      for (std::size_t l = 0; l < m; ++l) {
        if (l != 1) def.donors.push_back(l);
      }
      specs.push_back(def);
    }
    json boi_json = json::object();
    for (const auto& spec : specs) boi_json[spec.name] = boi(trace, spec.series, spec.donors);
    json by_series = json::array();
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<std::size_t> donors;
      for (std::size_t l = 0; l < m; ++l) {
        if (l != j) donors.push_back(l);
      }
      by_series.push_back({{"series", j + 1}, {"donors", donors.size()}, {"value", boi(trace, j, donors)}});
    }
    boi_json["by_series"] = by_series;
    write_json(options.out / "boi.json", boi_json);
    json named = boi_json;
    named.erase("by_series");
    report["boi"] = named;
  }

  // Predictive KDEs and HPDIs.
  json hpdis = {{"mass", outputs.hpdi_mass}, {"x0", json::array()}, {"future", json::array()},
                {"noise", json::array()}};
  auto grid_for = [&](const std::vector<double>& xs) {
    const double h = silverman_bandwidth(xs);
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    return GridSpec{*mn - 4.0 * h, *mx + 4.0 * h, outputs.kde_points};
  };
  for (std::size_t j = 0; j < m; ++j) {
    const std::string tag = std::to_string(j + 1);
    std::vector<double> x0s, noise;
    for (const auto& rec : trace) {
      x0s.push_back(rec.x0[j]);
      noise.push_back(rec.noise[j]);
    }
    const KdeGrid kx = kde(x0s, grid_for(x0s));
    write_kde(options.out / ("kde_x0_" + tag + ".csv"), kx);
    json ex = hpdi_entry(x0s, outputs.hpdi_mass, count_modes(kx));
    ex["series"] = j + 1;
    hpdis["x0"].push_back(ex);

    const auto kept = noise_window(noise, outputs);
    if (kept.size() < 2) throw InsufficientSamplesError("noise window of series " + tag + " keeps fewer than 2 draws");
    const KdeGrid kn = kde(kept, grid_for(kept));
    write_kde(options.out / ("kde_noise_" + tag + ".csv"), kn);
    json en = hpdi_entry(noise, outputs.hpdi_mass, count_modes(kn));
    en["series"] = j + 1;
    en["kde_fraction"] = static_cast<double>(kept.size()) / static_cast<double>(noise.size());
    hpdis["noise"].push_back(en);

    for (std::size_t k = 0; k < trace.front().future[j].size(); ++k) {
      std::vector<double> fs_;
      for (const auto& rec : trace) fs_.push_back(rec.future[j][k]);
      const KdeGrid kf = kde(fs_, grid_for(fs_));
      write_kde(options.out / ("kde_future_" + tag + "_" + std::to_string(k + 1) + ".csv"), kf);
      json ef = hpdi_entry(fs_, outputs.hpdi_mass, count_modes(kf));
      ef["series"] = j + 1;
      ef["step"] = k + 1;
      ef["mean"] = ergodic_average(fs_).back();
      if (k < data.series[j].held_out.size()) ef["truth"] = data.series[j].held_out[k];
      hpdis["future"].push_back(ef);
    }
  }
  write_json(options.out / "hpdi.json", hpdis);
  report["hpdi"] = hpdis;
  write_json(options.out / "report.json", report);
  return report;
}

json cmd_reproduce(const std::string& id, const std::string& scale, const fs::path& out, std::ostream& log,
                   std::ostream* progress) {
  const fs::path cfg_path = bundled_config(id);
  ExperimentConfig cfg = load_config(cfg_path);
  cfg.select_scale(scale);
  for (const char* v : {"weak", "strong"}) {
    if (!cfg.dirichlet_variants.count(v)) throw ConfigError(id + ": config lacks the '" + v + "' prior");
  }
  const fs::path base = out / id;

  Overrides ov;
  ov.scale = scale;
  cmd_simulate(cfg_path, ov, base / "data", log);

  json comparison = {{"experiment", id},
                     {"scale", scale},
                     {"iterations", cfg.sampler.total_iterations},
                     {"burn_in", cfg.sampler.burn_in}};
  for (const char* variant : {"weak", "strong"}) {
    log << "running " << id << " with the " << variant << " prior (" << cfg.sampler.total_iterations
        << " sweeps, burn-in " << cfg.sampler.burn_in << ")\n";
    RunOptions run;
    run.config = cfg_path;
    run.out = base / variant;
    run.overrides = ov;
    run.overrides.prior = variant;
    run.progress = progress;
    cmd_run(run);
    ReportOptions rep;
    rep.trace = base / variant;
    rep.out = base / variant / "report";
    comparison[variant] = cmd_report(rep);
  }

  const json& weak = comparison["weak"];
  const json& strong = comparison["strong"];
  log << "\n" << id << " (" << scale << " scale): mean PARE of the control parameters [%]\n";
  log << "  series        weak      strong\n";
  for (std::size_t j = 0; j < cfg.m(); ++j) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-10s %8s  %10s\n", series_label(&cfg, j).c_str(),
                  fmt(weak["mean_pare"][j].get<double>(), 2).c_str(),
                  fmt(strong["mean_pare"][j].get<double>(), 2).c_str());
    log << line;
  }
  if (weak.contains("boi")) {
    for (const auto& [name, value] : weak["boi"].items()) {
      log << "  " << name << ": weak " << fmt(value.get<double>() * 100.0, 1) << "%, strong "
          << fmt(strong["boi"][name].get<double>() * 100.0, 1) << "%\n";
    }
  }
  if (cfg.outputs.hpdi_focus) {
    const std::size_t j = *cfg.outputs.hpdi_focus;
    auto find = [&](const json& r) {
      for (const auto& e : r["hpdi"]["future"]) {
        if (e["series"] == j + 1 && e["step"] == 1) return e;
      }
      return json();
    };
    const json w = find(weak);
    const json s = find(strong);
    if (w.contains("width") && s.contains("width")) {
      const double ratio = s["width"].get<double>() / w["width"].get<double>();
      comparison["hpdi_shrinkage"] = ratio;
      log << "  " << cfg.outputs.hpdi_mass * 100.0 << "% HPDI of the first out-of-sample point of "
          << series_label(&cfg, j) << ": weak (" << fmt(w["lower"].get<double>()) << ", "
          << fmt(w["upper"].get<double>()) << "), strong (" << fmt(s["lower"].get<double>()) << ", "
          << fmt(s["upper"].get<double>()) << "), shrinkage " << fmt(ratio, 2) << "\n";
    }
  }
  write_json(base / "comparison.json", comparison);
  return comparison;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 4;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
      dynamic_cast<const TruthUnavailableError*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const Error*>(&e)) return 3;
  return 3;
}

}  // namespace pdgsbr

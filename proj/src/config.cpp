#include "pdgsbr/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <memory>

#include "pdgsbr/errors.hpp"
#include "pdgsbr/io.hpp"

#ifndef PDGSBR_CONFIG_DIR
#define PDGSBR_CONFIG_DIR "configs"
#endif

namespace pdgsbr {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

template <typename T>
T get(const YAML::Node& node, const std::string& key, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) bad(where, "missing '" + key + "'");
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    bad(where + "." + key, "has the wrong type");
  }
}

template <typename T>
T get_or(const YAML::Node& node, const std::string& key, T fallback, const std::string& where) {
  if (!node[key]) return fallback;
  return get<T>(node, key, where);
}

Eigen::MatrixXd square_matrix(const YAML::Node& node, std::size_t m, const std::string& where) {
  if (!node.IsSequence() || node.size() != m) bad(where, "expected " + std::to_string(m) + " rows");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < m; ++r) {
    if (!node[r].IsSequence() || node[r].size() != m) {
      bad(where, "row " + std::to_string(r + 1) + " needs " + std::to_string(m) + " entries");
    }
    for (std::size_t c = 0; c < m; ++c) {
      try {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = node[r][c].as<double>();
      } catch (const YAML::Exception&) {
        bad(where, "non-numeric entry");
      }
    }
  }
  return out;
}

PolynomialMap parse_map(const YAML::Node& node, const std::string& where) {
  if (node["quadratic"]) return quadratic_map(get<double>(node, "quadratic", where));
  if (node["cubic"]) return cubic_map(get<double>(node, "cubic", where));
  if (node["coefficients"]) return {get<std::vector<double>>(node, "coefficients", where)};
  bad(where, "map needs one of quadratic, cubic or coefficients");
}

SyntheticSpec parse_synthetic(const YAML::Node& data, const std::string& where) {
  SyntheticSpec spec;
  spec.seed = get<std::uint64_t>(data, "seed", where);
  spec.escape_bound = get_or<double>(data, "escape_bound", 0.0, where);
  const std::size_t horizon = get_or<std::size_t>(data, "horizon", 1, where);

  std::map<std::string, std::shared_ptr<const NoiseMixtureSpec>> components;
  const YAML::Node comps = data["components"];
  if (!comps || !comps.IsMap()) bad(where, "missing 'components' map");
  for (const auto& kv : comps) {
    const auto name = kv.first.as<std::string>();
    const std::string w = where + ".components." + name;
    components[name] = std::make_shared<const NoiseMixtureSpec>(NoiseMixtureSpec::make(
        get<std::vector<double>>(kv.second, "weights", w), get<std::vector<double>>(kv.second, "variances", w)));
  }

  const YAML::Node series = data["series"];
  if (!series || !series.IsSequence() || series.size() == 0) bad(where, "missing 'series' list");
  const std::size_t m = series.size();
  const YAML::Node measures = data["measures"];
  if (!measures || !measures.IsSequence() || measures.size() != m) {
    bad(where, "'measures' needs one row per series");
  }
  std::vector<std::vector<std::string>> names(m, std::vector<std::string>(m));
  for (std::size_t j = 0; j < m; ++j) {
    if (!measures[j].IsSequence() || measures[j].size() != m) {
      bad(where + ".measures", "row " + std::to_string(j + 1) + " needs " + std::to_string(m) + " entries");
    }
    for (std::size_t l = 0; l < m; ++l) {
      if (!measures[j][l].IsNull()) names[j][l] = measures[j][l].as<std::string>();
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t l = 0; l < m; ++l) {
      if (names[j][l] != names[l][j]) bad(where + ".measures", "must be symmetric (M_jl = M_lj)");
    }
  }

  for (std::size_t j = 0; j < m; ++j) {
    const std::string w = where + ".series[" + std::to_string(j + 1) + "]";
    const YAML::Node s = series[j];
    SeriesSpec out;
    if (!s["map"]) bad(w, "missing 'map'");
    out.map = parse_map(s["map"], w + ".map");
    out.n = get<std::size_t>(s, "n", w);
    out.x0 = get<double>(s, "x0", w);
    out.horizon = horizon;
    const auto selection = get<std::vector<double>>(s, "selection", w);
    if (selection.size() != m) bad(w, "selection needs " + std::to_string(m) + " entries");
    for (std::size_t l = 0; l < m; ++l) {
      if (selection[l] < 0.0) bad(w, "selection entries must be non-negative");
      if (selection[l] == 0.0) continue;
      if (names[j][l].empty()) bad(w, "positive selection on an undefined measure");
      const auto it = components.find(names[j][l]);
      if (it == components.end()) bad(w, "unknown component '" + names[j][l] + "'");
      out.noise.push_back({selection[l], it->second});
    }
    spec.names.push_back(get_or<std::string>(s, "name", "series_" + std::to_string(j + 1), w));
    spec.series.push_back(std::move(out));
  }
  return spec;
}

Eigen::MatrixXd symmetric_or_scalar(const YAML::Node& node, std::size_t m, double fallback,
                                    const std::string& where) {
  if (!node) return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m), fallback);
  if (node.IsScalar()) {
    return Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m), node.as<double>());
  }
  return square_matrix(node, m, where);
}

}  // namespace

void ExperimentConfig::select_dirichlet(const std::string& variant) {
  const auto it = dirichlet_variants.find(variant);
  if (it == dirichlet_variants.end()) bad("prior.dirichlet", "no variant named '" + variant + "'");
  dirichlet = variant;
  prior.dirichlet_alpha = it->second;
}

void ExperimentConfig::select_scale(const std::string& scale) {
  const auto it = scales.find(scale);
  if (it == scales.end()) bad("sampler.scales", "no scale named '" + scale + "'");
  sampler.total_iterations = it->second.first;
  sampler.burn_in = it->second.second;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");

  ExperimentConfig cfg;
  cfg.source = source;
  cfg.text = text;
  cfg.name = get_or<std::string>(root, "experiment", source.stem().string(), "config");

  const YAML::Node data = root["data"];
  if (!data) bad("config", "missing 'data' block");
  std::size_t m = 0;
  if (data["file"]) {
    std::filesystem::path p = get<std::string>(data, "file", "data");
    if (p.is_relative() && !source.empty()) p = source.parent_path() / p;
    cfg.data_file = p;
    m = get<std::size_t>(data, "m", "data");
  } else {
    cfg.synthetic = parse_synthetic(data, "data");
    m = cfg.synthetic->series.size();
  }

  const YAML::Node prior = root["prior"];
  if (!prior) bad("config", "missing 'prior' block");
  const YAML::Node variants = prior["dirichlet_variants"];
  if (!variants || !variants.IsMap() || variants.size() == 0) bad("prior", "missing 'dirichlet_variants'");
  for (const auto& kv : variants) {
    const auto name = kv.first.as<std::string>();
    cfg.dirichlet_variants[name] = square_matrix(kv.second, m, "prior.dirichlet_variants." + name);
  }
  cfg.prior = PriorConfig::defaults(m, cfg.dirichlet_variants.begin()->second);
  cfg.prior.poly_degree = get_or<std::size_t>(prior, "degree", 5, "prior");
  const auto horizon = get_or<std::size_t>(prior, "horizon", 1, "prior");
  cfg.prior.horizon.assign(m, horizon);
  const auto support = get_or<std::vector<double>>(prior, "x0_support", {-5.0, 5.0}, "prior");
  if (support.size() != 2) bad("prior.x0_support", "needs [lo, hi]");
  cfg.prior.x0_support.assign(m, Interval{support[0], support[1]});
  const auto gamma = get_or<std::vector<double>>(prior, "gamma", {1e-3, 1e-3}, "prior");
  if (gamma.size() != 2) bad("prior.gamma", "needs [a, b]");
  cfg.prior.gamma_a = gamma[0];
  cfg.prior.gamma_b = gamma[1];
  cfg.prior.beta_a = symmetric_or_scalar(prior["beta_a"], m, 0.5, "prior.beta_a");
  cfg.prior.beta_b = symmetric_or_scalar(prior["beta_b"], m, 0.5, "prior.beta_b");
  cfg.select_dirichlet(get_or<std::string>(prior, "dirichlet", cfg.dirichlet_variants.begin()->first, "prior"));

  const YAML::Node sampler = root["sampler"];
  if (sampler) {
    auto& s = cfg.sampler;
    s.kind = sampler_kind_from_string(get_or<std::string>(sampler, "kind", "pdgsbr", "sampler"));
    s.seed = get_or<std::uint64_t>(sampler, "seed", s.seed, "sampler");
    s.total_iterations = get_or<std::uint64_t>(sampler, "iterations", s.total_iterations, "sampler");
    s.burn_in = get_or<std::uint64_t>(sampler, "burn_in", s.burn_in, "sampler");
    s.thin = get_or<std::uint64_t>(sampler, "thin", s.thin, "sampler");
    s.slice_width = get_or<double>(sampler, "slice_width", s.slice_width, "sampler");
    s.max_stepout = get_or<int>(sampler, "max_stepout", s.max_stepout, "sampler");
    s.checkpoint_interval = get_or<std::uint64_t>(sampler, "checkpoint_interval", 0, "sampler");
    if (const YAML::Node scales = sampler["scales"]) {
      for (const auto& kv : scales) {
        const auto pair = kv.second.as<std::vector<std::uint64_t>>();
        if (pair.size() != 2) bad("sampler.scales", "each scale is [iterations, burn_in]");
        cfg.scales[kv.first.as<std::string>()] = {pair[0], pair[1]};
      }
    }
  }
  if (!cfg.scales.count("desk")) cfg.scales["desk"] = {10000, 5000};
  if (!cfg.scales.count("full")) cfg.scales["full"] = {60000, 20000};

  if (const YAML::Node out = root["outputs"]) {
    auto& o = cfg.outputs;
    o.hpdi_mass = get_or<double>(out, "hpdi_mass", o.hpdi_mass, "outputs");
    o.kde_points = get_or<std::size_t>(out, "kde_points", o.kde_points, "outputs");
    o.noise_kde_coverage = get_or<double>(out, "noise_kde_coverage", o.noise_kde_coverage, "outputs");
    if (const YAML::Node grid = out["noise_grid"]) {
      const auto lh = grid.as<std::vector<double>>();
      if (lh.size() != 2 || !(lh[0] < lh[1])) bad("outputs.noise_grid", "expected [lo, hi] with lo < hi");
      o.noise_grid = Interval{lh[0], lh[1]};
    }
    if (const YAML::Node focus = out["hpdi_focus"]) {
      const auto j = focus.as<std::size_t>();
      if (j < 1 || j > m) bad("outputs.hpdi_focus", "series index out of range");
      o.hpdi_focus = j - 1;
    }
    if (const YAML::Node boi = out["boi"]) {
      for (const auto& b : boi) {
        BoiSpec spec;
        const auto j = get<std::size_t>(b, "series", "outputs.boi");
        spec.name = get_or<std::string>(b, "name", "BoI_" + std::to_string(m), "outputs.boi");
        if (j < 1 || j > m) bad("outputs.boi", "series index out of range");
        spec.series = j - 1;
        for (auto l : get<std::vector<std::size_t>>(b, "donors", "outputs.boi")) {
          if (l < 1 || l > m || l == j) bad("outputs.boi", "donors must be other series in 1..m");
          spec.donors.push_back(l - 1);
        }
        o.boi.push_back(std::move(spec));
      }
    }
    if (!(o.hpdi_mass > 0.0 && o.hpdi_mass < 1.0)) bad("outputs.hpdi_mass", "must lie in (0, 1)");
    if (o.kde_points < 2) bad("outputs.kde_points", "must be at least 2");
    if (!(o.noise_kde_coverage > 0.0 && o.noise_kde_coverage <= 1.0)) {
      bad("outputs.noise_kde_coverage", "must lie in (0, 1]");
    }
  }

  cfg.prior.validate();
  cfg.sampler.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config " + path.string());
  }
  return parse_config(text, path);
}

std::filesystem::path bundled_config(const std::string& id) {
  const std::filesystem::path p = std::filesystem::path(PDGSBR_CONFIG_DIR) / (id + ".yaml");
  if (!std::filesystem::exists(p)) throw ConfigError("no bundled config for '" + id + "'");
  return p;
}

void validate_against(const ExperimentConfig& cfg, std::size_t data_m) {
  if (cfg.m() != data_m) {
    throw ConfigError("config describes m = " + std::to_string(cfg.m()) + " series but the data has " +
                      std::to_string(data_m));
  }
  for (const auto& [name, alpha] : cfg.dirichlet_variants) {
    if (static_cast<std::size_t>(alpha.rows()) != data_m) {
      throw ConfigError("dirichlet variant '" + name + "' has the wrong dimension");
    }
  }
  if (cfg.sampler.kind == SamplerKind::gsbr && data_m != 1) {
    throw ConfigError("sampler gsbr needs a single series");
  }
}

MultiSeries simulate_config(const ExperimentConfig& cfg, bool allow_escape) {
  if (!cfg.synthetic) throw ConfigError("config has no synthetic data block");
  Rng rng(cfg.synthetic->seed);
  return simulate_multi(cfg.synthetic->series, rng, SimulateOptions{allow_escape});
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace pdgsbr

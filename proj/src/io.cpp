#include "pdgsbr/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pdgsbr/errors.hpp"

namespace pdgsbr {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw SchemaError("expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw SchemaError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vectors_to_json(const std::vector<Eigen::VectorXd>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return out;
}

std::vector<Eigen::VectorXd> vectors_from_json(const json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& v : j) {
    const auto xs = v.get<std::vector<double>>();
    out.push_back(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())));
  }
  return out;
}

template <typename F>
decltype(auto) schema_guard(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json to_json(const MultiSeries& data) {
  json series = json::array();
  for (const auto& s : data.series) {
    json js = {{"observations", s.observations}, {"held_out", s.held_out}};
    if (s.truth) {
      js["truth"] = {{"map", s.truth->map.coefficients},
                     {"noise", {{"weights", s.truth->noise.weights()}, {"variances", s.truth->noise.variances()}}},
                     {"x0", s.truth->x0}};
    }
    series.push_back(std::move(js));
  }
  return {{"series", std::move(series)}};
}

MultiSeries multiseries_from_json(const json& j) {
  return schema_guard("data", [&] {
    MultiSeries data;
    for (const auto& js : j.at("series")) {
      Series s;
      s.observations = js.at("observations").get<std::vector<double>>();
      if (js.contains("held_out")) s.held_out = js.at("held_out").get<std::vector<double>>();
      if (js.contains("truth")) {
        const auto& t = js.at("truth");
        s.truth = SeriesTruth{PolynomialMap{t.at("map").get<std::vector<double>>()},
                              NoiseMixtureSpec::make(t.at("noise").at("weights").get<std::vector<double>>(),
                                                     t.at("noise").at("variances").get<std::vector<double>>()),
                              t.at("x0").get<double>()};
      }
      data.series.push_back(std::move(s));
    }
    return data;
  });
}

json to_json(const ChainState& state) {
  json alloc = json::array();
  for (const auto& a : state.alloc) alloc.push_back({{"delta", a.delta}, {"d", a.d}, {"N", a.N}});
  json j = {{"iteration", state.iteration},
            {"atoms", state.atoms.raw()},
            {"alloc", std::move(alloc)},
            {"p", matrix_to_json(state.p)},
            {"lambda", matrix_to_json(state.lambda)},
            {"theta", vectors_to_json(state.theta)},
            {"x0", state.x0},
            {"future", state.future},
            {"ols_fallback", state.ols_fallback}};
  j["m"] = state.atoms.m();
  if (state.common_precision) j["common_precision"] = *state.common_precision;
  return j;
}

ChainState chain_state_from_json(const json& j) {
  return schema_guard("checkpoint state", [&] {
    ChainState state;
    state.iteration = j.at("iteration").get<std::uint64_t>();
    state.atoms = AtomTable(j.at("m").get<std::size_t>());
    state.atoms.raw() = j.at("atoms").get<std::vector<std::vector<double>>>();
    if (state.atoms.raw().size() != state.atoms.pair_count() && !state.atoms.raw().empty()) {
      throw SchemaError("checkpoint atom table does not match m");
    }
    for (const auto& a : j.at("alloc")) {
      state.alloc.push_back({a.at("delta").get<std::vector<int>>(), a.at("d").get<std::vector<std::int64_t>>(),
                             a.at("N").get<std::vector<std::int64_t>>()});
    }
    state.p = matrix_from_json(j.at("p"));
    state.lambda = matrix_from_json(j.at("lambda"));
    state.theta = vectors_from_json(j.at("theta"));
    state.x0 = j.at("x0").get<std::vector<double>>();
    state.future = j.at("future").get<std::vector<std::vector<double>>>();
    state.ols_fallback = j.at("ols_fallback").get<std::vector<bool>>();
    if (j.contains("common_precision")) state.common_precision = j.at("common_precision").get<double>();
    return state;
  });
}

json to_json(const Checkpoint& cp) {
  return {{"sampler", to_string(cp.kind)}, {"rng", cp.rng_state}, {"state", to_json(cp.state)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  return schema_guard("checkpoint", [&] {
    Checkpoint cp;
    cp.kind = sampler_kind_from_string(j.at("sampler").get<std::string>());
    cp.rng_state = j.at("rng").get<std::string>();
    cp.state = chain_state_from_json(j.at("state"));
    return cp;
  });
}

json to_json(const TraceRecord& rec) {
  json j = {{"iteration", rec.iteration},
            {"theta", vectors_to_json(rec.theta)},
            {"x0", rec.x0},
            {"future", rec.future},
            {"noise", rec.noise}};
  if (rec.p.size() > 0) {
    j["p"] = matrix_to_json(rec.p);
    j["lambda"] = matrix_to_json(rec.lambda);
    j["atoms"] = rec.atom_counts;
  }
  if (rec.common_precision) j["tau"] = *rec.common_precision;
  return j;
}

TraceRecord trace_record_from_json(const json& j) {
  return schema_guard("trace record", [&] {
    TraceRecord rec;
    rec.iteration = j.at("iteration").get<std::uint64_t>();
    rec.theta = vectors_from_json(j.at("theta"));
    rec.x0 = j.at("x0").get<std::vector<double>>();
    rec.future = j.at("future").get<std::vector<std::vector<double>>>();
    rec.noise = j.at("noise").get<std::vector<double>>();
    if (j.contains("p")) {
      rec.p = matrix_from_json(j.at("p"));
      rec.lambda = matrix_from_json(j.at("lambda"));
      rec.atom_counts = j.at("atoms").get<std::vector<std::size_t>>();
    }
    if (j.contains("tau")) rec.common_precision = j.at("tau").get<double>();
    return rec;
  });
}

std::vector<std::string> trace_csv_header(const TraceRecord& first) {
  std::vector<std::string> cols{"iteration"};
  const std::size_t m = first.theta.size();
  auto name = [](const char* base, std::size_t a, std::size_t b) {
    return std::string(base) + "_" + std::to_string(a) + "_" + std::to_string(b);
  };
  for (std::size_t j = 0; j < m; ++j) {
    for (Eigen::Index r = 0; r < first.theta[j].size(); ++r) {
      cols.push_back(name("theta", j + 1, static_cast<std::size_t>(r)));
    }
  }
  const bool mixture = first.p.size() > 0;
  if (mixture) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < m; ++l) cols.push_back(name("p", j + 1, l + 1));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = j; l < m; ++l) cols.push_back(name("lambda", j + 1, l + 1));
    }
  }
  for (std::size_t j = 0; j < m; ++j) cols.push_back("x0_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < first.future[j].size(); ++k) cols.push_back(name("future", j + 1, k + 1));
  }
  for (std::size_t j = 0; j < m; ++j) cols.push_back("noise_" + std::to_string(j + 1));
  if (mixture) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = j; l < m; ++l) cols.push_back(name("atoms", j + 1, l + 1));
    }
  }
  if (first.common_precision) cols.push_back("tau");
  return cols;
}

std::string trace_csv_row(const TraceRecord& rec) {
  std::string row = std::to_string(rec.iteration);
  auto put = [&row](double x) {
    row += ',';
    row += format_double(x);
  };
  const std::size_t m = rec.theta.size();
  for (const auto& t : rec.theta) {
    for (Eigen::Index r = 0; r < t.size(); ++r) put(t[r]);
  }
  const bool mixture = rec.p.size() > 0;
  if (mixture) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < m; ++l) put(rec.p(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = j; l < m; ++l) {
        put(rec.lambda(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)));
      }
    }
  }
  for (double x : rec.x0) put(x);
  for (const auto& f : rec.future) {
    for (double x : f) put(x);
  }
  for (double z : rec.noise) put(z);
  if (mixture) {
    for (std::size_t c : rec.atom_counts) row += "," + std::to_string(c);
  }
  if (rec.common_precision) put(*rec.common_precision);
  return row;
}

void write_series_csv(const std::filesystem::path& path, const Series& series) {
  std::string out = "index,value,held_out\n";
  std::size_t i = 1;
  for (double x : series.observations) out += std::to_string(i++) + "," + format_double(x) + ",0\n";
  for (double x : series.held_out) out += std::to_string(i++) + "," + format_double(x) + ",1\n";
  write_text(path, out);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<TraceRecord> read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trace_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pdgsbr

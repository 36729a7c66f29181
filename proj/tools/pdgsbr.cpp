#include <CLI11.hpp>

#include <iostream>

#include "pdgsbr/commands.hpp"
#include "pdgsbr/errors.hpp"

namespace {

using pdgsbr::Overrides;

struct Flags {
  std::string config;
  std::string out = "runs";
  std::uint64_t seed = 0;
  std::string sampler;
  std::string scale;
  std::string prior;
  std::string resume;
  std::string data;
  std::string trace;
  bool allow_escape = false;
  bool quiet = false;
};

Overrides overrides_from(const Flags& f, const CLI::App& sub) {
  Overrides ov;
  if (sub.count("--seed")) ov.seed = f.seed;
  if (!f.sampler.empty()) ov.sampler = pdgsbr::sampler_kind_from_string(f.sampler);
  if (!f.scale.empty()) ov.scale = f.scale;
  if (!f.prior.empty()) ov.prior = f.prior;
  ov.allow_escape = f.allow_escape;
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint Bayesian reconstruction of multiple short noisy dynamical time-series"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PDGSBR_VERSION);
  Flags f;

  auto* simulate = app.add_subcommand("simulate", "generate synthetic data from a config");
  simulate->add_option("--config", f.config, "experiment config (YAML)")->required();
  simulate->add_option("--seed", f.seed, "data seed override");
  simulate->add_option("--out", f.out, "output directory");
  simulate->add_flag("--allow-escape", f.allow_escape, "keep the finite prefix of a diverging series");

  auto* run = app.add_subcommand("run", "run a Gibbs chain");
  run->add_option("--config", f.config, "experiment config (YAML) or a run manifest to replay")->required();
  run->add_option("--seed", f.seed, "sampler seed override");
  run->add_option("--out", f.out, "run directory");
  run->add_option("--sampler", f.sampler, "sampler")->check(CLI::IsMember({"pdgsbr", "gsbr", "parametric"}));
  run->add_option("--scale", f.scale, "iteration scale (desk or full)");
  run->add_option("--prior", f.prior, "Dirichlet prior variant (e.g. weak, strong)");
  run->add_option("--data", f.data, "data JSON instead of the config's data block");
  run->add_option("--resume", f.resume, "checkpoint to continue from");
  run->add_flag("--allow-escape", f.allow_escape, "keep the finite prefix of a diverging series");
  run->add_flag("--quiet", f.quiet, "no progress lines");

  auto* report = app.add_subcommand("report", "diagnostics from a trace");
  report->add_option("--trace", f.trace, "trace.jsonl or run directory")->required();
  report->add_option("--data", f.data, "data JSON (default: next to the trace)");
  report->add_option("--config", f.config, "config or manifest (default: the run's manifest)");
  report->add_option("--out", f.out, "report directory");

  std::string experiment;
  auto* reproduce = app.add_subcommand("reproduce", "simulate, run both priors and compare");
  reproduce->add_option("experiment", experiment, "4A, 4B or 4C")->required()->check(
      CLI::IsMember({"4A", "4B", "4C"}));
  reproduce->add_option("--scale", f.scale, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  reproduce->add_option("--out", f.out, "output directory");
  reproduce->add_flag("--quiet", f.quiet, "no progress lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      pdgsbr::cmd_simulate(f.config, overrides_from(f, *simulate), f.out, std::cout);
    } else if (*run) {
      pdgsbr::RunOptions opts;
      opts.config = f.config;
      opts.out = f.out;
      opts.overrides = overrides_from(f, *run);
      if (!f.data.empty()) opts.data = f.data;
      if (!f.resume.empty()) opts.resume = f.resume;
      if (!f.quiet) opts.progress = &std::cerr;
      const auto result = pdgsbr::cmd_run(opts);
      std::cout << "wrote " << result.trace.size() << " records to " << f.out << "\n";
    } else if (*report) {
      pdgsbr::ReportOptions opts;
      opts.trace = f.trace;
      if (!f.data.empty()) opts.data = f.data;
      if (!f.config.empty()) opts.config = f.config;
      opts.out = f.out;
      const auto summary = pdgsbr::cmd_report(opts);
      std::cout << summary.dump(2) << "\n";
    } else if (*reproduce) {
      pdgsbr::cmd_reproduce(experiment, f.scale.empty() ? "desk" : f.scale, f.out, std::cout,
                            f.quiet ? nullptr : &std::cerr);
    }
  } catch (const pdgsbr::KernelError& e) {
    std::cerr << "error: sampler failed: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pdgsbr::exit_code_for(e);
  }
  return 0;
}

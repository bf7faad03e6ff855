#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rarecc/cli.hpp"
#include "rarecc/errors.hpp"
#include "rarecc/util.hpp"

using namespace rarecc;

namespace {

CliConfig load_or_default(const std::string& config_path, const SolveOverrides& ov) {
  CliConfig cfg;
  if (!config_path.empty()) {
    cfg = load_config(config_path);
  } else if (ov.preset) {
    cfg.scenario = preset(*ov.preset);
  } else {
    throw ConfigError("either --config or --preset is required");
  }
  apply_overrides(cfg.scenario, ov);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained optimal velocity control of a stochastic traffic PDE"};
  app.require_subcommand(1);

  std::string config_path, out_dir, strategy = "ldt-cc", preset_name, fields_path;
  double alpha = -1.0, z = -1.0, eta = -1.0;
  long mc_samples = -1;
  long long seed = -1;
  int threads = 0;
  int source_count = 3;
  std::vector<std::string> run_dirs;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Scenario config file (JSON)");
    cmd->add_option("--preset", preset_name,
                    "Preset scenario: density_05, density_02, cvs, flux");
    cmd->add_option("--alpha", alpha, "Target violation probability override");
    cmd->add_option("--z", z, "Safety threshold override");
    cmd->add_option("--eta", eta, "CVaR risk-aversion weight override");
    cmd->add_option("--mc-samples", mc_samples, "Validation sample count override");
    cmd->add_option("--seed", seed, "Run seed override");
    cmd->add_option("--threads", threads, "Worker pool cap (0 = hardware)");
    cmd->add_option("--out", out_dir, "Output directory (or set RARECC_OUT)");
  };

  CLI::App* solve = app.add_subcommand("solve", "Run one control strategy and validate it");
  add_common(solve);
  solve->add_option("--strategy", strategy, "baseline | nonseparable | cvar | ldt-cc");

  CLI::App* validate =
      app.add_subcommand("validate", "Monte Carlo violation estimate of a stored control");
  add_common(validate);
  validate->add_option("--fields", fields_path, "fields.csv produced by solve")->required();

  CLI::App* mpp = app.add_subcommand("mpp", "Most-probable-point analysis of a stored control");
  add_common(mpp);
  mpp->add_option("--fields", fields_path, "fields.csv produced by solve")->required();

  CLI::App* table = app.add_subcommand("table", "Aggregate run reports into a comparison table");
  table->add_option("dirs", run_dirs, "Run directories containing report.json")->required();

  CLI::App* sample_source =
      app.add_subcommand("sample-source", "Dump source-term realizations for inspection");
  add_common(sample_source);
  sample_source->add_option("--count", source_count, "Number of realizations");

  CLI11_PARSE(app, argc, argv);

  SolveOverrides ov;
  if (!preset_name.empty()) ov.preset = preset_name;
  if (alpha >= 0.0) ov.alpha = alpha;
  if (z >= 0.0) ov.z = z;
  if (eta >= 0.0) ov.eta = eta;
  if (mc_samples >= 0) ov.mc_samples = mc_samples;
  if (seed >= 0) ov.seed = static_cast<uint64_t>(seed);
  if (threads > 0) set_thread_count(threads);

  try {
    if (solve->parsed()) {
      const CliConfig cfg = load_or_default(config_path, ov);
      const std::string run_name = cfg.scenario.name + "-" + strategy + "-s" +
                                   std::to_string(cfg.scenario.seed);
      const std::string dir = resolve_out_dir(out_dir, run_name);
      const RunArtifacts art = cmd_solve(cfg, strategy, dir);
      std::cout << "report:  " << art.report_path << "\n"
                << "fields:  " << art.fields_path << "\n"
                << "dist:    " << art.dist_path << "\n"
                << art.table_row << "\n";
      if (art.exit_code != kExitOk)
        std::cerr << "warning: solver did not meet its convergence tolerances\n";
      return art.exit_code;
    }
    if (validate->parsed()) {
      const CliConfig cfg = load_or_default(config_path, ov);
      const long n = mc_samples > 0 ? mc_samples : cfg.scenario.samples.mc;
      const uint64_t s =
          seed >= 0 ? static_cast<uint64_t>(seed) : derive_seed(cfg.scenario.seed, kStreamMc);
      const std::string dir = resolve_out_dir(out_dir, cfg.scenario.name + "-validate");
      const ViolationEstimate est = cmd_validate(fields_path, cfg, n, s, dir);
      std::printf("violation %.6g%% +- %.6g%% (%ld/%ld samples)\n", est.p_hat * 100.0,
                  est.ci_half_width * 100.0, est.n_violations, est.n_samples);
      return kExitOk;
    }
    if (mpp->parsed()) {
      const CliConfig cfg = load_or_default(config_path, ov);
      const std::string dir = resolve_out_dir(out_dir, cfg.scenario.name + "-mpp");
      const MppArtifacts art = cmd_mpp(fields_path, cfg, dir);
      std::printf("beta %.6f  form_prob %.6g  |F-z| %.3g  kkt %.3g  %s\n", art.result.beta,
                  std_normal_cdf(-art.result.beta),
                  std::abs(art.result.F_at_star - cfg.scenario.z), art.result.kkt_residual,
                  art.result.converged ? "converged" : "NOT converged");
      return art.result.converged ? kExitOk : kExitNotConverged;
    }
    if (table->parsed()) {
      std::cout << cmd_table(run_dirs);
      return kExitOk;
    }
    if (sample_source->parsed()) {
      const CliConfig cfg = load_or_default(config_path, ov);
      const uint64_t s = seed >= 0 ? static_cast<uint64_t>(seed) : cfg.scenario.seed;
      const std::string dir = resolve_out_dir(out_dir, cfg.scenario.name + "-sources");
      const std::string path = cmd_sample_source(cfg, source_count, s, dir);
      std::cout << "sources: " << path << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}

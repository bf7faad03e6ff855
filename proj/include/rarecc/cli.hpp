#ifndef RARECC_CLI_HPP
#define RARECC_CLI_HPP

#include <optional>
#include <string>
#include <vector>

#include "rarecc/mc.hpp"
#include "rarecc/optimizer.hpp"
#include "rarecc/scenarios.hpp"

namespace rarecc {

// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNotConverged = 2;

struct CliConfig {
  Scenario scenario;
  SolverSettings solver;
};

// Config file = scenario JSON plus an optional "solver" section; an empty
// object reproduces the preset defaults.
CliConfig load_config(const std::string& path);
CliConfig config_from_json(const std::string& text);

struct SolveOverrides {
  std::optional<std::string> preset;
  std::optional<double> alpha;
  std::optional<double> z;
  std::optional<double> eta;
  std::optional<long> mc_samples;
  std::optional<uint64_t> seed;
};

void apply_overrides(Scenario& sc, const SolveOverrides& ov);

struct RunArtifacts {
  std::string report_path;  // summary + metadata JSON
  std::string fields_path;  // t,x,rho,u,s CSV under theta = mu_theta
  std::string dist_path;    // one max-measure sample per line
  std::string table_row;
  int exit_code = kExitOk;
  RunReport report;
};

// Runs one strategy end to end: solve, validate by Monte Carlo, write all
// artifacts into out_dir.
RunArtifacts cmd_solve(const CliConfig& cfg, const std::string& strategy,
                       const std::string& out_dir);

// Re-estimates the violation probability of a stored control field.
ViolationEstimate cmd_validate(const std::string& fields_path, const CliConfig& cfg,
                               long n_samples, uint64_t seed, const std::string& out_dir);

struct MppArtifacts {
  MppResult result;
  std::string report_path;
  std::string fields_path;  // rho/u/s under the MPP source
};

// Solves the most-probable-point problem for a stored control and dumps the
// MPP-driven density/velocity snapshot.
MppArtifacts cmd_mpp(const std::string& fields_path, const CliConfig& cfg,
                     const std::string& out_dir);

// Aggregates report.json files from run directories into a fixed-layout
// comparison table (one row per directory, in the order given).
std::string cmd_table(const std::vector<std::string>& run_dirs);

// Debug dump of source realizations: sample,t,x,s rows.
std::string cmd_sample_source(const CliConfig& cfg, int count, uint64_t seed,
                              const std::string& out_dir);

// Field dump helpers (CSV with header t,x,rho,u,s, 9 significant digits).
void write_fields_csv(const std::string& path, const Grid& grid, const Field& rho,
                      const Field& u, const Field& s);
Field read_control_csv(const std::string& path, const Grid& grid);

std::string report_to_json(const RunReport& rep, const ViolationEstimate* est);
std::string format_table_row(const RunReport& rep);

// Output directory resolution: explicit flag, else $RARECC_OUT, else ./runs.
std::string resolve_out_dir(const std::string& flag_value, const std::string& run_name);

}  // namespace rarecc

#endif  // RARECC_CLI_HPP

#include "rarecc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "rarecc/errors.hpp"
#include "rarecc/form.hpp"
#include "rarecc/pde.hpp"
#include "rarecc/util.hpp"

namespace rarecc {

using nlohmann::json;

namespace {

SolverSettings solver_from_json(const json& j) {
  SolverSettings st;
  st.max_outer = j.value("max_outer", st.max_outer);
  st.max_inner = j.value("max_inner", st.max_inner);
  st.tol_grad = j.value("tol_grad", st.tol_grad);
  st.tol_feas = j.value("tol_feas", st.tol_feas);
  st.tol_kkt = j.value("tol_kkt", st.tol_kkt);
  st.lbfgs_memory = j.value("lbfgs_memory", st.lbfgs_memory);
  st.penalty_init = j.value("penalty_init", st.penalty_init);
  st.penalty_growth = j.value("penalty_growth", st.penalty_growth);
  st.penalty_cap = j.value("penalty_cap", st.penalty_cap);
  st.fd_step = j.value("fd_step", st.fd_step);
  st.max_fun_evals = j.value("max_fun_evals", st.max_fun_evals);
  if (!(st.tol_grad > 0.0 && st.tol_feas > 0.0 && st.tol_kkt > 0.0))
    throw ConfigError("solver: tolerances must be positive");
  if (!(st.penalty_growth > 1.0)) throw ConfigError("solver: penalty_growth must exceed 1");
  return st;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string timestamp_utc() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

CliConfig config_from_json(const std::string& text) {
  CliConfig cfg;
  cfg.scenario = scenario_from_json(text);
  const json j = json::parse(text);
  if (j.contains("solver")) cfg.solver = solver_from_json(j["solver"]);
  return cfg;
}

CliConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

void apply_overrides(Scenario& sc, const SolveOverrides& ov) {
  if (ov.preset) sc = preset(*ov.preset);
  if (ov.alpha) sc.alpha = *ov.alpha;
  if (ov.z) sc.z = *ov.z;
  if (ov.eta) sc.eta = *ov.eta;
  if (ov.mc_samples) sc.samples.mc = *ov.mc_samples;
  if (ov.seed) sc.seed = *ov.seed;
  validate_scenario(sc);
}

void write_fields_csv(const std::string& path, const Grid& grid, const Field& rho,
                      const Field& u, const Field& s) {
  require_shape(u, grid.nt, grid.nx, "write_fields_csv: u");
  require_shape(s, grid.nt, grid.nx, "write_fields_csv: s");
  std::string out;
  out.reserve(static_cast<std::size_t>(grid.nt) * grid.nx * 48 + 16);
  out += "t,x,rho,u,s\n";
  for (int n = 0; n < grid.nt; ++n) {
    for (int j = 0; j < grid.nx; ++j) {
      out += fmt9(grid.t_node(n));
      out += ',';
      out += fmt9(grid.x_center(j));
      out += ',';
      out += fmt9(rho.at(n, j));
      out += ',';
      out += fmt9(u.at(n, j));
      out += ',';
      out += fmt9(s.at(n, j));
      out += '\n';
    }
  }
  atomic_write_file(path, out);
}

Field read_control_csv(const std::string& path, const Grid& grid) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,x,rho,u,s", 0) != 0)
    throw ConfigError("fields csv: missing t,x,rho,u,s header in " + path);
  Field u = Field::steps(grid);
  std::size_t row = 0;
  const std::size_t expected = static_cast<std::size_t>(grid.nt) * grid.nx;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= expected) throw ConfigError("fields csv: more rows than the grid has cells");
    // u is the fourth column
    const char* p = line.c_str();
    int commas = 0;
    while (*p && commas < 3) {
      if (*p == ',') ++commas;
      ++p;
    }
    if (commas < 3) throw ConfigError("fields csv: malformed row " + std::to_string(row));
    u.data()[row] = std::strtod(p, nullptr);
    ++row;
  }
  if (row != expected)
    throw ConfigError("fields csv: expected " + std::to_string(expected) + " rows, got " +
                      std::to_string(row) + " (grid mismatch?)");
  return u;
}

std::string report_to_json(const RunReport& rep, const ViolationEstimate* est) {
  json summary;
  summary["strategy"] = rep.strategy;
  summary["alpha"] = rep.alpha;
  summary["z"] = rep.z;
  summary["converged"] = rep.converged;
  summary["iterations_outer"] = rep.iterations_outer;
  summary["iterations_inner"] = rep.iterations_inner;
  summary["n_fun_evals"] = rep.n_fun_evals;
  summary["objective"] = rep.objective;
  summary["objective_fresh"] = rep.objective_fresh;
  summary["eq_cost"] = rep.eq_cost;
  summary["eq_cost_fresh"] = rep.eq_cost_fresh;
  summary["pg_norm"] = rep.pg_norm;
  summary["beta"] = rep.beta;
  summary["form_prob"] = rep.form_prob;
  summary["lambda"] = rep.lambda;
  summary["theta_star"] = rep.theta_star;
  summary["tau"] = rep.tau;
  summary["cvar_total"] = rep.cvar_total;
  summary["cvar_penalty"] = rep.cvar_penalty;
  summary["residuals"] = {{"feas", rep.res_feas}, {"kkt", rep.res_kkt}, {"prob", rep.res_prob}};
  summary["violation_prob"] = est ? est->p_hat : rep.violation_prob;
  summary["ci_half_width"] = est ? est->ci_half_width : rep.ci_half_width;
  summary["n_mc"] = est ? est->n_samples : rep.n_mc;
  summary["smooth_true_gap"] = est ? est->smooth_true_gap : 0.0;
  summary["seed"] = rep.seed;
  summary["config_digest"] = rep.config_digest;

  // wall time lives in the metadata block so that identical runs produce
  // byte-identical summaries
  json meta;
  meta["wall_time_s"] = rep.wall_time_s;
  meta["written_at"] = timestamp_utc();
  meta["threads"] = thread_count();

  json root;
  root["summary"] = summary;
  root["meta"] = meta;
  return root.dump(2) + "\n";
}

std::string format_table_row(const RunReport& rep) {
  char alpha[32];
  if (rep.strategy == "baseline" || rep.strategy == "nonseparable")
    std::snprintf(alpha, sizeof(alpha), "N/A");
  else
    std::snprintf(alpha, sizeof(alpha), "%.2g%%", rep.alpha * 100.0);
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%-14s | %-8s | %6d | %9.2f | %10.2f%% | %10.4f",
                rep.strategy.c_str(), alpha, rep.iterations_inner, rep.wall_time_s,
                rep.violation_prob * 100.0, rep.objective);
  return buf;
}

std::string resolve_out_dir(const std::string& flag_value, const std::string& run_name) {
  std::string base = flag_value;
  if (base.empty()) {
    if (const char* env = std::getenv("RARECC_OUT")) base = env;
  }
  if (base.empty()) base = "runs";
  return (std::filesystem::path(base) / run_name).string();
}

RunArtifacts cmd_solve(const CliConfig& cfg, const std::string& strategy,
                       const std::string& out_dir) {
  const Scenario& sc = cfg.scenario;
  RunArtifacts art;

  RunReport rep;
  if (strategy == "baseline") {
    rep = solve_baseline(sc, cfg.solver, sc.seed);
  } else if (strategy == "nonseparable") {
    rep = solve_nonseparable(sc, cfg.solver, sc.seed);
  } else if (strategy == "cvar") {
    rep = solve_cvar(sc, cfg.solver, sc.eta, sc.alpha, sc.z, sc.seed);
  } else if (strategy == "ldt-cc") {
    rep = solve_ldt_cc(sc, cfg.solver, sc.alpha, sc.z, sc.seed);
  } else {
    throw ConfigError("unknown strategy '" + strategy +
                      "' (expected baseline, nonseparable, cvar, or ldt-cc)");
  }

  // Validation: the distribution pass and the violation count share samples.
  const uint64_t mc_seed = derive_seed(rep.seed, kStreamMc);
  const std::vector<double> dist =
      max_measure_distribution(rep.u_star, sc, sc.samples.mc, mc_seed);
  ViolationEstimate est;
  est.n_samples = sc.samples.mc;
  est.seed = mc_seed;
  for (double v : dist)
    if (v >= sc.z) ++est.n_violations;
  est.p_hat = static_cast<double>(est.n_violations) / static_cast<double>(est.n_samples);
  est.ci_half_width =
      1.96 * std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(est.n_samples));
  est.smooth_true_gap = smooth_true_gap(rep.u_star, sc);
  rep.violation_prob = est.p_hat;
  rep.ci_half_width = est.ci_half_width;
  rep.n_mc = est.n_samples;

  // artifacts
  const Grid grid = make_grid(sc);
  const KLBasis basis = make_basis(sc);
  const std::vector<double> rho0 = make_rho0(sc, grid);
  const Field s_mean = realize_source(basis, basis.mu_theta, sc.mask, grid);
  const PdeSolution sol = forward_solve(grid, rho0, rep.u_star, s_mean);
  Field rho_steps = Field::steps(grid);
  for (int n = 0; n < grid.nt; ++n)
    for (int j = 0; j < grid.nx; ++j) rho_steps.at(n, j) = sol.rho.at(n, j);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  art.fields_path = (fs::path(out_dir) / "fields.csv").string();
  write_fields_csv(art.fields_path, grid, rho_steps, rep.u_star, s_mean);

  art.dist_path = (fs::path(out_dir) / "max_distribution.txt").string();
  {
    std::string out;
    out.reserve(dist.size() * 24);
    for (double v : dist) {
      out += fmt9(v);
      out += '\n';
    }
    atomic_write_file(art.dist_path, out);
  }

  art.report_path = (fs::path(out_dir) / "report.json").string();
  atomic_write_file(art.report_path, report_to_json(rep, &est));
  {
    const std::string cfg_path = (fs::path(out_dir) / "config.json").string();
    atomic_write_file(cfg_path, scenario_to_json(sc));
  }

  art.table_row = format_table_row(rep);
  art.exit_code = rep.converged ? kExitOk : kExitNotConverged;
  art.report = std::move(rep);
  return art;
}

ViolationEstimate cmd_validate(const std::string& fields_path, const CliConfig& cfg,
                               long n_samples, uint64_t seed, const std::string& out_dir) {
  const Scenario& sc = cfg.scenario;
  const Grid grid = make_grid(sc);
  const Field u = read_control_csv(fields_path, grid);
  const ViolationEstimate est = estimate_violation(u, sc, sc.z, n_samples, seed);

  json j;
  j["summary"] = {{"p_hat", est.p_hat},
                  {"n_samples", est.n_samples},
                  {"n_violations", est.n_violations},
                  {"ci_half_width", est.ci_half_width},
                  {"z", sc.z},
                  {"seed", est.seed},
                  {"smooth_true_gap", est.smooth_true_gap},
                  {"config_digest", scenario_digest(sc)}};
  j["meta"] = {{"written_at", timestamp_utc()}};
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  atomic_write_file((fs::path(out_dir) / "validate.json").string(), j.dump(2) + "\n");
  return est;
}

MppArtifacts cmd_mpp(const std::string& fields_path, const CliConfig& cfg,
                     const std::string& out_dir) {
  const Scenario& sc = cfg.scenario;
  const Grid grid = make_grid(sc);
  const std::vector<double> rho0 = make_rho0(sc, grid);
  const KLBasis basis = make_basis(sc);
  const Field u = read_control_csv(fields_path, grid);

  EventContext ectx;
  ectx.grid = &grid;
  ectx.rho0 = &rho0;
  ectx.basis = &basis;
  ectx.mask = &sc.mask;
  ectx.event = SmoothEvent{sc.risk, sc.gamma};

  const PdeEventMap map(ectx, u);
  MppArtifacts art;
  art.result = solve_mpp(map, basis.mu_theta, basis.sigma_theta_diag, sc.z, MppSettings{});

  // MPP-driven snapshot
  const Field s_star = realize_source(basis, art.result.theta_star, sc.mask, grid);
  const PdeSolution sol = forward_solve(grid, rho0, u, s_star);
  Field rho_steps = Field::steps(grid);
  for (int n = 0; n < grid.nt; ++n)
    for (int j = 0; j < grid.nx; ++j) rho_steps.at(n, j) = sol.rho.at(n, j);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  art.fields_path = (fs::path(out_dir) / "fields_mpp.csv").string();
  write_fields_csv(art.fields_path, grid, rho_steps, u, s_star);

  json j;
  j["summary"] = {{"theta_star", art.result.theta_star},
                  {"lambda", art.result.lambda},
                  {"beta", art.result.beta},
                  {"form_prob", std_normal_cdf(-art.result.beta)},
                  {"F_at_star", art.result.F_at_star},
                  {"abs_F_minus_z", std::abs(art.result.F_at_star - sc.z)},
                  {"kkt_residual", art.result.kkt_residual},
                  {"feas_residual", art.result.feas_residual},
                  {"converged", art.result.converged},
                  {"config_digest", scenario_digest(sc)}};
  j["meta"] = {{"written_at", timestamp_utc()}};
  art.report_path = (fs::path(out_dir) / "mpp.json").string();
  atomic_write_file(art.report_path, j.dump(2) + "\n");
  return art;
}

std::string cmd_table(const std::vector<std::string>& run_dirs) {
  std::ostringstream out;
  out << "Method         | Target a | Iter.  | Time (s)  | Viol. Prob. | Eq. Cost\n";
  out << "---------------+----------+--------+-----------+-------------+---------\n";
  namespace fs = std::filesystem;
  for (const std::string& dir : run_dirs) {
    const std::string path = (fs::path(dir) / "report.json").string();
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw ConfigError("table: cannot parse " + path + ": " + e.what());
    }
    const json& s = j.at("summary");
    RunReport rep;
    rep.strategy = s.value("strategy", "?");
    rep.alpha = s.value("alpha", 0.0);
    rep.iterations_inner = s.value("iterations_inner", 0);
    rep.wall_time_s = j.contains("meta") ? j["meta"].value("wall_time_s", 0.0) : 0.0;
    rep.violation_prob = s.value("violation_prob", -1.0);
    rep.objective = s.value("eq_cost", 0.0);
    out << format_table_row(rep) << "\n";
  }
  return out.str();
}

std::string cmd_sample_source(const CliConfig& cfg, int count, uint64_t seed,
                              const std::string& out_dir) {
  if (count < 1) throw ConfigError("sample-source: count must be >= 1");
  const Scenario& sc = cfg.scenario;
  const Grid grid = make_grid(sc);
  const KLBasis basis = make_basis(sc);
  const ThetaMatrix thetas = sample_theta(basis, count, seed);

  std::string out = "sample,t,x,s\n";
  for (int i = 0; i < count; ++i) {
    const Field s = realize_source(basis, thetas.row(i), sc.mask, grid);
    for (int n = 0; n < grid.nt; ++n)
      for (int j = 0; j < grid.nx; ++j) {
        out += std::to_string(i);
        out += ',';
        out += fmt9(grid.t_node(n));
        out += ',';
        out += fmt9(grid.x_center(j));
        out += ',';
        out += fmt9(s.at(n, j));
        out += '\n';
      }
  }
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "sources.csv").string();
  atomic_write_file(path, out);
  return path;
}

}  // namespace rarecc

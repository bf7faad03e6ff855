#ifndef RARECC_OPTIMIZER_HPP
#define RARECC_OPTIMIZER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rarecc/form.hpp"
#include "rarecc/grid.hpp"
#include "rarecc/lbfgs.hpp"
#include "rarecc/scenarios.hpp"

namespace rarecc {

// Sub-seed streams derived from a run seed.
inline constexpr uint64_t kStreamCost = 1;   // SAA cost samples
inline constexpr uint64_t kStreamRisk = 2;   // CVaR risk samples
inline constexpr uint64_t kStreamMc = 3;     // validation Monte Carlo
inline constexpr uint64_t kStreamFresh = 4;  // fresh cost re-evaluation

struct SolverSettings {
  int max_outer = 25;           // augmented-Lagrangian outer iterations
  int max_inner = 600;          // L-BFGS iterations per subproblem
  double tol_grad = 1e-5;       // projected-gradient tolerance
  double tol_feas = 1e-6;       // constraint tolerance
  double tol_kkt = 1e-6;        // stationarity tolerance
  int lbfgs_memory = 10;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_cap = 1e8;
  double fd_step = 1e-5;        // Hessian-vector finite-difference step
  int max_fun_evals = 0;        // optional evaluation budget (0 = unlimited)
};

struct RunReport {
  std::string strategy;
  Field u_star;
  bool converged = false;

  double z = 0.0;
  double alpha = 0.0;

  // costs: the scenario's fundamental objective and the equilibrium cost,
  // both on the SAA sample set and on a fresh sample set
  double objective = 0.0;
  double objective_fresh = 0.0;
  double eq_cost = 0.0;
  double eq_cost_fresh = 0.0;

  int iterations_outer = 0;
  int iterations_inner = 0;
  int n_fun_evals = 0;
  double wall_time_s = 0.0;
  double pg_norm = 0.0;

  // LDT-CC extras
  std::vector<double> theta_star;
  double lambda = 0.0;
  double beta = 0.0;
  double form_prob = 0.0;
  double res_feas = 0.0;  // |F(u*, theta*) - z|
  double res_kkt = 0.0;   // max-norm of the stationarity residual
  double res_prob = 0.0;  // max(0, Phi(-beta) - alpha)

  // CVaR extras
  double tau = 0.0;
  double cvar_total = 0.0;
  double cvar_penalty = 0.0;

  // validation, filled by the mc module
  double violation_prob = -1.0;
  double ci_half_width = 0.0;
  long n_mc = 0;

  uint64_t seed = 0;
  std::string config_digest;
};

// Box-projected L-BFGS on the SAA expectation of the scenario's objective
// (Equilibrium or FluxComposite), started from u0 = U(rho0) broadcast.
RunReport solve_baseline(const Scenario& sc, const SolverSettings& st, uint64_t seed);

// Same, with the nonseparable twin of the scenario objective.
RunReport solve_nonseparable(const Scenario& sc, const SolverSettings& st, uint64_t seed);

// Joint minimization over (u, tau) of SAA[J] + eta*(tau + mean softplus /
// alpha) over a dedicated risk sample set. warm_u skips the internal
// baseline initialization run.
RunReport solve_cvar(const Scenario& sc, const SolverSettings& st, double eta, double alpha,
                     double z, uint64_t seed, const Field* warm_u = nullptr);

// Single-level chance-constrained program over (u, theta*, lambda):
// objective SAA[J]; constraints beta >= Phi^{-1}(1-alpha) (inequality),
// F(u, theta*) = z, and the MPP stationarity system, handled by an augmented
// Lagrangian with finite-difference Hessian-vector products.
RunReport solve_ldt_cc(const Scenario& sc, const SolverSettings& st, double alpha, double z,
                       uint64_t seed, const Field* warm_u = nullptr);

// Fresh evaluation pass over a returned LDT-CC iterate, independent of any
// solver state.
struct LdtResiduals {
  double F = 0.0;
  double feas = 0.0;
  double kkt = 0.0;
  double beta = 0.0;
  double form_prob = 0.0;
  double prob_excess = 0.0;
};
LdtResiduals verify_ldt_residuals(const Scenario& sc, const RunReport& report);

}  // namespace rarecc

#endif  // RARECC_OPTIMIZER_HPP

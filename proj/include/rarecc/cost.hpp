#ifndef RARECC_COST_HPP
#define RARECC_COST_HPP

#include <string>

#include "rarecc/grid.hpp"
#include "rarecc/randfield.hpp"

namespace rarecc {

struct Scenario;  // scenarios.hpp

enum class ObjectiveKind { Equilibrium, Nonseparable, FluxComposite, FluxCompositeNonseparable };

const char* objective_kind_name(ObjectiveKind k);
ObjectiveKind objective_kind_from_name(const std::string& name);

struct Objective {
  ObjectiveKind kind = ObjectiveKind::Equilibrium;
  double beta_t = 0.005;
  double beta_x = 0.005;
  double beta_end = 0.1;

  bool operator==(const Objective&) const = default;
};

// Density-weighted tracking of the Greenshields speed U(rho) = 1 - rho:
// J = sum over steps of 1/2 rho ((1 - rho) - u)^2 dx dt. Nonnegative, zero
// iff u matches U(rho) wherever rho > 0.
double equilibrium_cost(const Field& rho, const Field& u, const Grid& grid);

// equilibrium_cost minus the separable part sum 1/2 rho (1 - rho)^2 dx dt.
double nonseparable_cost(const Field& rho, const Field& u, const Grid& grid);

// Throughput-promoting composite: running term rho (u^2/2 - u + 2 rho)
// (or rho (u^2/2 - u + 2 rho u) for the nonseparable flavor), forward-
// difference smoothness penalties on u, and a terminal density penalty.
double flux_composite_cost(const Field& rho, const Field& u, const Grid& grid,
                           const Objective& obj);

double objective_value(const Objective& obj, const Field& rho, const Field& u, const Grid& grid);

// Value plus exact partials with respect to every rho[n][j] (state shape,
// terminal slice included) and the explicit u dependence (step shape).
double objective_partials(const Objective& obj, const Field& rho, const Field& u,
                          const Grid& grid, Field& dJ_drho, Field& dJ_du);

struct SaaResult {
  double value = 0.0;
  Field grad_u;
};

// Precomputed per-sample state for repeated SAA evaluations of one solve.
struct SaaWorkspace {
  Grid grid;
  std::vector<double> rho0;
  Objective objective;
  std::vector<SourceProfile> profiles;

  static SaaWorkspace build(const Scenario& sc, const Objective& obj,
                            const ThetaMatrix& samples);

  // Mean objective and mean control gradient (one adjoint per sample);
  // deterministic for any thread count.
  double value_and_grad(const Field& u, Field& grad_u) const;
  double value(const Field& u) const;
};

// Sample-average objective (1/N) sum_i J(u, rho(theta_i)) with the gradient
// accumulated by one adjoint sweep per sample. Deterministic for a fixed
// sample matrix and any thread count.
SaaResult saa_objective(const Field& u, const Scenario& sc, const ThetaMatrix& samples);

// Value only, for reporting.
double saa_value(const Objective& obj, const Field& u, const Scenario& sc,
                 const ThetaMatrix& samples);

}  // namespace rarecc

#endif  // RARECC_COST_HPP

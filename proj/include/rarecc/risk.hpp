#ifndef RARECC_RISK_HPP
#define RARECC_RISK_HPP

#include <string>

#include "rarecc/grid.hpp"

namespace rarecc {

enum class RiskKind { MaxDensity, MaxCVS, MaxFlux };

const char* risk_kind_name(RiskKind k);
RiskKind risk_kind_from_name(const std::string& name);

struct RiskMeasure {
  RiskKind kind = RiskKind::MaxDensity;
  int window_cells = 5;   // CVS only
  double floor = 1e-8;    // CVS denominator guard

  bool operator==(const RiskMeasure&) const = default;
};

// Pointwise risk measure on the space-time grid, one row per time step:
// row n pairs the post-step density rho[n+1] with the control u[n] that
// produced it. MaxDensity is rho itself, MaxFlux is rho*u, and MaxCVS is the
// density-weighted speed dispersion over a periodic window of `window_cells`
// cells: sqrt(Var(u)) / max(mean(u), floor).
Field measure_field(const RiskMeasure& m, const Field& rho, const Field& u, const Grid& grid);

// Reverse-mode accumulation: given the cotangent Mbar of the measure field,
// adds the pullback into rho_bar (state shape) and u_bar (step shape).
void measure_vjp(const RiskMeasure& m, const Field& rho, const Field& u, const Grid& grid,
                 const Field& Mbar, Field& rho_bar, Field& u_bar);

// Log-sum-exp smooth maximum with the domain-average normalization, so a
// constant field maps to itself. Stable: never exponentiates above zero.
double smooth_max(const Field& M, double gamma);

// dF/dM: softmax weights (sum to one).
Field smooth_max_grad(const Field& M, double gamma);

double true_max(const Field& M);

// Overflow-safe smooth positive part eps*log(1+exp(y/eps)) and its slope.
double softplus(double y, double epsilon);
double softplus_sigmoid(double y, double epsilon);

// The smoothed extreme-event functional F(rho, u) = smooth_max(M(rho, u)),
// with exact partials for the adjoint.
struct SmoothEvent {
  RiskMeasure measure;
  double gamma = 0.01;

  double value(const Field& rho, const Field& u, const Grid& grid) const;
  // Returns F and fills dF_drho (state shape) / dF_du (step shape).
  double value_and_partials(const Field& rho, const Field& u, const Grid& grid, Field& dF_drho,
                            Field& dF_du) const;
  double true_value(const Field& rho, const Field& u, const Grid& grid) const;
};

}  // namespace rarecc

#endif  // RARECC_RISK_HPP

#ifndef RARECC_PDE_HPP
#define RARECC_PDE_HPP

#include <functional>
#include <span>
#include <vector>

#include "rarecc/grid.hpp"
#include "rarecc/randfield.hpp"

namespace rarecc {

// Full density trajectory of the forced continuity equation, advanced with
// the centered Lax-Friedrichs flux and forward Euler:
//   rho[n+1][j] = (rho[n][j-1] + rho[n][j+1]) / 2
//               - dt/(2 dx) * (rho[n][j+1] u[n][j+1] - rho[n][j-1] u[n][j-1])
//               + dt * s[n][j],
// with periodic index wrapping.
struct PdeSolution {
  Field rho;  // (nt+1) x nx
};

PdeSolution forward_solve(const Grid& grid, std::span<const double> rho0, const Field& u,
                          const Field& s);
PdeSolution forward_solve(const Grid& grid, std::span<const double> rho0, const Field& u,
                          const SourceProfile& s);

// Reverse sweep of the linearized update rule. dJ_drho holds the partial
// derivative of a scalar objective with respect to every rho[n][j]
// (including n = nt); dJ_du_direct its explicit dependence on u. Returns
// exact gradients with respect to u and s.
struct AdjointResult {
  Field grad_u;  // nt x nx
  Field grad_s;  // nt x nx
};

AdjointResult adjoint_sweep(const Grid& grid, std::span<const double> rho0, const Field& u,
                            const Field& s, const Field& dJ_drho, const Field& dJ_du_direct);

// Variant over an already-computed trajectory (avoids the re-solve).
AdjointResult adjoint_sweep(const Grid& grid, const Field& rho, const Field& u,
                            const Field& dJ_drho, const Field& dJ_du_direct);

// As above but only the time-collapsed source gradient is needed:
// a[j] = sum over mask-active steps n of dt * p[n+1][j]. Feeds grad_theta.
std::vector<double> adjoint_source_collapsed(const Grid& grid, const Field& rho, const Field& u,
                                             const Field& dJ_drho, const Mask& mask);

// Scalar functional of the trajectory: returns its value and fills the
// partial derivatives with respect to rho (state shape) and u (step shape).
using ScalarFunctional =
    std::function<double(const Field& rho, const Field& u, Field& dJ_drho, Field& dJ_du)>;

// Gradient of scalar_fn(rho(theta), u) with respect to theta, chaining the
// adjoint source gradient through ds/dtheta_k = sqrt(lambda_k) f_k exp(theta_k) * mask.
std::vector<double> grad_theta(const Grid& grid, std::span<const double> rho0, const Field& u,
                               const KLBasis& basis, std::span<const double> theta,
                               const Mask& mask, const ScalarFunctional& scalar_fn);

}  // namespace rarecc

#endif  // RARECC_PDE_HPP

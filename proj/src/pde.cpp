#include "rarecc/pde.hpp"

#include <cmath>
#include <string>

#include "rarecc/errors.hpp"

namespace rarecc {

namespace {

void check_forward_inputs(const Grid& grid, std::span<const double> rho0, const Field& u) {
  if (static_cast<int>(rho0.size()) != grid.nx)
    throw ConfigError("forward_solve: rho0 must have nx entries");
  require_shape(u, grid.nt, grid.nx, "forward_solve: u");
  for (double r : rho0)
    if (!std::isfinite(r)) throw NumericalError("forward_solve: non-finite rho0");
  require_finite(u, "forward_solve: u");
}

// One Lax-Friedrichs step; src may be null (treated as zero).
inline void lxf_step(int nx, double lam, double dt, const double* r, const double* un,
                     const double* src, double* rn) {
  // lam = dt / (2 dx)
  auto body = [&](int j, int jm, int jp) {
    double v = 0.5 * (r[jm] + r[jp]) - lam * (r[jp] * un[jp] - r[jm] * un[jm]);
    if (src) v += dt * src[j];
    rn[j] = v;
  };
  body(0, nx - 1, 1);
  for (int j = 1; j < nx - 1; ++j) body(j, j - 1, j + 1);
  body(nx - 1, nx - 2, 0);
}

}  // namespace

PdeSolution forward_solve(const Grid& grid, std::span<const double> rho0, const Field& u,
                          const Field& s) {
  check_forward_inputs(grid, rho0, u);
  require_shape(s, grid.nt, grid.nx, "forward_solve: s");
  require_finite(s, "forward_solve: s");

  PdeSolution sol;
  sol.rho = Field::state(grid);
  for (int j = 0; j < grid.nx; ++j) sol.rho.at(0, j) = rho0[static_cast<std::size_t>(j)];
  const double lam = grid.dt / (2.0 * grid.dx);
  for (int n = 0; n < grid.nt; ++n)
    lxf_step(grid.nx, lam, grid.dt, sol.rho.row(n), u.row(n), s.row(n), sol.rho.row(n + 1));
  return sol;
}

PdeSolution forward_solve(const Grid& grid, std::span<const double> rho0, const Field& u,
                          const SourceProfile& s) {
  check_forward_inputs(grid, rho0, u);
  PdeSolution sol;
  sol.rho = Field::state(grid);
  for (int j = 0; j < grid.nx; ++j) sol.rho.at(0, j) = rho0[static_cast<std::size_t>(j)];
  const double lam = grid.dt / (2.0 * grid.dx);
  for (int n = 0; n < grid.nt; ++n) {
    const double* src = s.mask.active_t(grid.t_node(n)) ? s.g.data() : nullptr;
    lxf_step(grid.nx, lam, grid.dt, sol.rho.row(n), u.row(n), src, sol.rho.row(n + 1));
  }
  return sol;
}

AdjointResult adjoint_sweep(const Grid& grid, const Field& rho, const Field& u,
                            const Field& dJ_drho, const Field& dJ_du_direct) {
  require_shape(rho, grid.nt + 1, grid.nx, "adjoint_sweep: rho");
  require_shape(u, grid.nt, grid.nx, "adjoint_sweep: u");
  require_shape(dJ_drho, grid.nt + 1, grid.nx, "adjoint_sweep: dJ_drho");
  require_shape(dJ_du_direct, grid.nt, grid.nx, "adjoint_sweep: dJ_du_direct");

  const int nx = grid.nx;
  const int nt = grid.nt;
  const double lam = grid.dt / (2.0 * grid.dx);

  AdjointResult out;
  out.grad_u = Field::steps(grid);
  out.grad_s = Field::steps(grid);

  // p[n][k] = total dJ/drho[n][k]; sweep backward from the terminal slice.
  std::vector<double> p(static_cast<std::size_t>(nx));
  std::vector<double> p_prev(static_cast<std::size_t>(nx));
  for (int k = 0; k < nx; ++k) p[static_cast<std::size_t>(k)] = dJ_drho.at(nt, k);

  for (int n = nt - 1; n >= 0; --n) {
    const double* un = u.row(n);
    const double* rn = rho.row(n);
    double* gu = out.grad_u.row(n);
    double* gs = out.grad_s.row(n);
    const double* jd = dJ_drho.row(n);
    const double* jdu = dJ_du_direct.row(n);

    auto body = [&](int k, int km, int kp) {
      // grad through rho[n+1][k] = ... + dt * s[n][k]
      gs[k] = grid.dt * p[static_cast<std::size_t>(k)];
      // u[n][k] enters cells k-1 and k+1 of the next slice with -/+ lam*rho[n][k]
      gu[k] = jdu[k] + lam * rn[k] * (p[static_cast<std::size_t>(kp)] -
                                      p[static_cast<std::size_t>(km)]);
      // transpose of the density stencil
      p_prev[static_cast<std::size_t>(k)] =
          jd[k] + (0.5 + lam * un[k]) * p[static_cast<std::size_t>(kp)] +
          (0.5 - lam * un[k]) * p[static_cast<std::size_t>(km)];
    };
    body(0, nx - 1, 1);
    for (int k = 1; k < nx - 1; ++k) body(k, k - 1, k + 1);
    body(nx - 1, nx - 2, 0);
    std::swap(p, p_prev);
  }
  return out;
}

AdjointResult adjoint_sweep(const Grid& grid, std::span<const double> rho0, const Field& u,
                            const Field& s, const Field& dJ_drho, const Field& dJ_du_direct) {
  const PdeSolution sol = forward_solve(grid, rho0, u, s);
  return adjoint_sweep(grid, sol.rho, u, dJ_drho, dJ_du_direct);
}

std::vector<double> adjoint_source_collapsed(const Grid& grid, const Field& rho, const Field& u,
                                             const Field& dJ_drho, const Mask& mask) {
  require_shape(rho, grid.nt + 1, grid.nx, "adjoint_source_collapsed: rho");
  require_shape(dJ_drho, grid.nt + 1, grid.nx, "adjoint_source_collapsed: dJ_drho");

  const int nx = grid.nx;
  const int nt = grid.nt;
  const double lam = grid.dt / (2.0 * grid.dx);

  std::vector<double> acc(static_cast<std::size_t>(nx), 0.0);
  std::vector<double> p(static_cast<std::size_t>(nx));
  std::vector<double> p_prev(static_cast<std::size_t>(nx));
  for (int k = 0; k < nx; ++k) p[static_cast<std::size_t>(k)] = dJ_drho.at(nt, k);

  for (int n = nt - 1; n >= 0; --n) {
    if (mask.active_t(grid.t_node(n)))
      for (int k = 0; k < nx; ++k)
        acc[static_cast<std::size_t>(k)] += grid.dt * p[static_cast<std::size_t>(k)];
    const double* un = u.row(n);
    const double* jd = dJ_drho.row(n);
    auto body = [&](int k, int km, int kp) {
      p_prev[static_cast<std::size_t>(k)] =
          jd[k] + (0.5 + lam * un[k]) * p[static_cast<std::size_t>(kp)] +
          (0.5 - lam * un[k]) * p[static_cast<std::size_t>(km)];
    };
    body(0, nx - 1, 1);
    for (int k = 1; k < nx - 1; ++k) body(k, k - 1, k + 1);
    body(nx - 1, nx - 2, 0);
    std::swap(p, p_prev);
  }
  return acc;
}

std::vector<double> grad_theta(const Grid& grid, std::span<const double> rho0, const Field& u,
                               const KLBasis& basis, std::span<const double> theta,
                               const Mask& mask, const ScalarFunctional& scalar_fn) {
  const SourceProfile profile = source_profile(basis, theta, mask, grid);
  const PdeSolution sol = forward_solve(grid, rho0, u, profile);

  Field dJ_drho = Field::state(grid);
  Field dJ_du = Field::steps(grid);
  scalar_fn(sol.rho, u, dJ_drho, dJ_du);

  const std::vector<double> acc = adjoint_source_collapsed(grid, sol.rho, u, dJ_drho, mask);

  // ds[n][j]/dtheta_k = sqrt(lambda_k) f_k(x_j) exp(theta_k) inside the mask.
  std::vector<double> g(static_cast<std::size_t>(basis.d), 0.0);
  for (int k = 0; k < basis.d; ++k) {
    const double amp =
        std::sqrt(basis.lambdas[static_cast<std::size_t>(k)]) * std::exp(theta[k]);
    double sum = 0.0;
    for (int j = 0; j < grid.nx; ++j) {
      const double x = grid.x_center(j);
      if (!mask.active_x(x)) continue;
      sum += acc[static_cast<std::size_t>(j)] * basis.eigenfunction(k, x);
    }
    g[static_cast<std::size_t>(k)] = amp * sum;
  }
  return g;
}

}  // namespace rarecc

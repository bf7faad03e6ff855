#include "rarecc/cost.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "rarecc/errors.hpp"
#include "rarecc/pde.hpp"
#include "rarecc/scenarios.hpp"
#include "rarecc/util.hpp"

namespace rarecc {

const char* objective_kind_name(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::Equilibrium: return "equilibrium";
    case ObjectiveKind::Nonseparable: return "nonseparable";
    case ObjectiveKind::FluxComposite: return "flux_composite";
    case ObjectiveKind::FluxCompositeNonseparable: return "flux_composite_nonseparable";
  }
  return "?";
}

ObjectiveKind objective_kind_from_name(const std::string& name) {
  if (name == "equilibrium") return ObjectiveKind::Equilibrium;
  if (name == "nonseparable") return ObjectiveKind::Nonseparable;
  if (name == "flux_composite") return ObjectiveKind::FluxComposite;
  if (name == "flux_composite_nonseparable") return ObjectiveKind::FluxCompositeNonseparable;
  throw ConfigError("unknown objective '" + name + "'");
}

namespace {

void check_shapes(const Field& rho, const Field& u, const Grid& grid, const char* what) {
  require_shape(rho, grid.nt + 1, grid.nx, what);
  require_shape(u, grid.nt, grid.nx, what);
}

}  // namespace

double equilibrium_cost(const Field& rho, const Field& u, const Grid& grid) {
  check_shapes(rho, u, grid, "equilibrium_cost");
  const double w = grid.cell_weight();
  double acc = 0.0;
  for (int n = 0; n < grid.nt; ++n) {
    const double* r = rho.row(n);
    const double* un = u.row(n);
    for (int j = 0; j < grid.nx; ++j) {
      const double e = (1.0 - r[j]) - un[j];
      acc += 0.5 * r[j] * e * e;
    }
  }
  return acc * w;
}

double nonseparable_cost(const Field& rho, const Field& u, const Grid& grid) {
  check_shapes(rho, u, grid, "nonseparable_cost");
  const double w = grid.cell_weight();
  double acc = 0.0;
  for (int n = 0; n < grid.nt; ++n) {
    const double* r = rho.row(n);
    for (int j = 0; j < grid.nx; ++j) {
      const double uu = 1.0 - r[j];
      acc += 0.5 * r[j] * uu * uu;
    }
  }
  return equilibrium_cost(rho, u, grid) - acc * w;
}

double flux_composite_cost(const Field& rho, const Field& u, const Grid& grid,
                           const Objective& obj) {
  check_shapes(rho, u, grid, "flux_composite_cost");
  const bool nonsep = obj.kind == ObjectiveKind::FluxCompositeNonseparable;
  const double w = grid.cell_weight();
  double acc = 0.0;
  for (int n = 0; n < grid.nt; ++n) {
    const double* r = rho.row(n);
    const double* un = u.row(n);
    for (int j = 0; j < grid.nx; ++j) {
      const double uj = un[j];
      const double core = nonsep ? (0.5 * uj * uj - uj + 2.0 * r[j] * uj)
                                 : (0.5 * uj * uj - uj + 2.0 * r[j]);
      acc += r[j] * core;
    }
  }
  double reg = 0.0;
  for (int n = 0; n + 1 < grid.nt; ++n) {
    const double* u0 = u.row(n);
    const double* u1 = u.row(n + 1);
    for (int j = 0; j < grid.nx; ++j) {
      const double d = (u1[j] - u0[j]) / grid.dt;
      reg += obj.beta_t * d * d;
    }
  }
  for (int n = 0; n < grid.nt; ++n) {
    const double* un = u.row(n);
    for (int j = 0; j < grid.nx; ++j) {
      const int jp = (j + 1 == grid.nx) ? 0 : j + 1;
      const double d = (un[jp] - un[j]) / grid.dx;
      reg += obj.beta_x * d * d;
    }
  }
  double term = 0.0;
  const double* rT = rho.row(grid.nt);
  for (int j = 0; j < grid.nx; ++j) term += rT[j] * rT[j];
  return (acc + reg) * w + obj.beta_end * term * grid.dx;
}

double objective_value(const Objective& obj, const Field& rho, const Field& u,
                       const Grid& grid) {
  switch (obj.kind) {
    case ObjectiveKind::Equilibrium: return equilibrium_cost(rho, u, grid);
    case ObjectiveKind::Nonseparable: return nonseparable_cost(rho, u, grid);
    case ObjectiveKind::FluxComposite:
    case ObjectiveKind::FluxCompositeNonseparable:
      return flux_composite_cost(rho, u, grid, obj);
  }
  throw InternalError("objective_value: unhandled kind");
}

double objective_partials(const Objective& obj, const Field& rho, const Field& u,
                          const Grid& grid, Field& dJ_drho, Field& dJ_du) {
  check_shapes(rho, u, grid, "objective_partials");
  dJ_drho = Field::state(grid);
  dJ_du = Field::steps(grid);
  const double w = grid.cell_weight();

  switch (obj.kind) {
    case ObjectiveKind::Equilibrium:
    case ObjectiveKind::Nonseparable: {
      const bool nonsep = obj.kind == ObjectiveKind::Nonseparable;
      for (int n = 0; n < grid.nt; ++n) {
        const double* r = rho.row(n);
        const double* un = u.row(n);
        double* gr = dJ_drho.row(n);
        double* gu = dJ_du.row(n);
        for (int j = 0; j < grid.nx; ++j) {
          const double e = (1.0 - r[j]) - un[j];
          gr[j] += w * (0.5 * e * e - r[j] * e);
          gu[j] += -w * r[j] * e;
          if (nonsep) {
            const double uu = 1.0 - r[j];
            gr[j] -= w * (0.5 * uu * uu - r[j] * uu);
          }
        }
      }
      return objective_value(obj, rho, u, grid);
    }
    case ObjectiveKind::FluxComposite:
    case ObjectiveKind::FluxCompositeNonseparable: {
      const bool nonsep = obj.kind == ObjectiveKind::FluxCompositeNonseparable;
      for (int n = 0; n < grid.nt; ++n) {
        const double* r = rho.row(n);
        const double* un = u.row(n);
        double* gr = dJ_drho.row(n);
        double* gu = dJ_du.row(n);
        for (int j = 0; j < grid.nx; ++j) {
          const double uj = un[j];
          if (nonsep) {
            gr[j] += w * (0.5 * uj * uj - uj + 4.0 * r[j] * uj);
            gu[j] += w * r[j] * (uj - 1.0 + 2.0 * r[j]);
          } else {
            gr[j] += w * (0.5 * uj * uj - uj + 4.0 * r[j]);
            gu[j] += w * r[j] * (uj - 1.0);
          }
        }
      }
      // forward-difference smoothness penalties
      for (int n = 0; n + 1 < grid.nt; ++n) {
        const double* u0 = u.row(n);
        const double* u1 = u.row(n + 1);
        double* g0 = dJ_du.row(n);
        double* g1 = dJ_du.row(n + 1);
        const double f = 2.0 * obj.beta_t * w / (grid.dt * grid.dt);
        for (int j = 0; j < grid.nx; ++j) {
          const double d = f * (u1[j] - u0[j]);
          g1[j] += d;
          g0[j] -= d;
        }
      }
      for (int n = 0; n < grid.nt; ++n) {
        const double* un = u.row(n);
        double* gu = dJ_du.row(n);
        const double f = 2.0 * obj.beta_x * w / (grid.dx * grid.dx);
        for (int j = 0; j < grid.nx; ++j) {
          const int jp = (j + 1 == grid.nx) ? 0 : j + 1;
          const double d = f * (un[jp] - un[j]);
          gu[jp] += d;
          gu[j] -= d;
        }
      }
      double* grT = dJ_drho.row(grid.nt);
      const double* rT = rho.row(grid.nt);
      for (int j = 0; j < grid.nx; ++j) grT[j] += 2.0 * obj.beta_end * rT[j] * grid.dx;
      return flux_composite_cost(rho, u, grid, obj);
    }
  }
  throw InternalError("objective_partials: unhandled kind");
}

SaaWorkspace SaaWorkspace::build(const Scenario& sc, const Objective& obj,
                                 const ThetaMatrix& samples) {
  if (samples.n < 1) throw ConfigError("saa: need at least one sample row");
  SaaWorkspace ws;
  ws.grid = make_grid(sc);
  ws.rho0 = make_rho0(sc, ws.grid);
  ws.objective = obj;
  const KLBasis basis = make_basis(sc);
  ws.profiles.reserve(static_cast<std::size_t>(samples.n));
  for (int i = 0; i < samples.n; ++i)
    ws.profiles.push_back(source_profile(basis, samples.row(i), sc.mask, ws.grid));
  return ws;
}

double SaaWorkspace::value_and_grad(const Field& u, Field& grad_u) const {
  require_shape(u, grid.nt, grid.nx, "saa: u");
  const std::size_t n = profiles.size();
  const std::size_t nb = block_count(n);
  std::vector<double> block_value(nb, 0.0);
  std::vector<Field> block_grad(nb);

  parallel_blocks(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    Field acc = Field::steps(grid);
    double val = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      try {
        const PdeSolution sol = forward_solve(grid, rho0, u, profiles[i]);
        Field dJ_drho, dJ_du;
        val += objective_partials(objective, sol.rho, u, grid, dJ_drho, dJ_du);
        const AdjointResult adj = adjoint_sweep(grid, sol.rho, u, dJ_drho, dJ_du);
        for (std::size_t q = 0; q < acc.size(); ++q) acc.data()[q] += adj.grad_u.data()[q];
      } catch (const std::exception& e) {
        throw NumericalError("saa: sample " + std::to_string(i) + ": " + e.what());
      }
    }
    block_value[b] = val;
    block_grad[b] = std::move(acc);
  });

  double value = 0.0;
  grad_u = Field::steps(grid);
  for (std::size_t b = 0; b < nb; ++b) {
    value += block_value[b];
    if (block_grad[b].size() != 0)
      for (std::size_t q = 0; q < grad_u.size(); ++q)
        grad_u.data()[q] += block_grad[b].data()[q];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t q = 0; q < grad_u.size(); ++q) grad_u.data()[q] *= inv_n;
  return value * inv_n;
}

double SaaWorkspace::value(const Field& u) const {
  require_shape(u, grid.nt, grid.nx, "saa: u");
  const std::size_t n = profiles.size();
  const std::size_t nb = block_count(n);
  std::vector<double> block_value(nb, 0.0);
  parallel_blocks(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    double val = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const PdeSolution sol = forward_solve(grid, rho0, u, profiles[i]);
      val += objective_value(objective, sol.rho, u, grid);
    }
    block_value[b] = val;
  });
  double v = 0.0;
  for (double x : block_value) v += x;
  return v / static_cast<double>(n);
}

SaaResult saa_objective(const Field& u, const Scenario& sc, const ThetaMatrix& samples) {
  const SaaWorkspace ws = SaaWorkspace::build(sc, sc.objective, samples);
  SaaResult out;
  out.value = ws.value_and_grad(u, out.grad_u);
  return out;
}

double saa_value(const Objective& obj, const Field& u, const Scenario& sc,
                 const ThetaMatrix& samples) {
  const SaaWorkspace ws = SaaWorkspace::build(sc, obj, samples);
  return ws.value(u);
}

}  // namespace rarecc

#include "rarecc/form.hpp"

#include <cmath>
#include <string>

#include "rarecc/errors.hpp"
#include "rarecc/lbfgs.hpp"
#include "rarecc/pde.hpp"

namespace rarecc {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

double std_normal_ppf(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ConfigError("std_normal_ppf: p must lie strictly in (0, 1), got " + std::to_string(p));

  // Acklam's rational approximation.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // One Halley step on Phi(x) - p. Skipped in the far tails where the
  // correction would overflow; the raw approximation is already ~1e-9 there.
  if (std::abs(x) < 10.0) {
    const double e = std_normal_cdf(x) - p;
    const double u = e * 2.506628274631000502 * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double beta_index(std::span<const double> theta, std::span<const double> mu,
                  std::span<const double> sigma_diag) {
  if (theta.size() != mu.size() || theta.size() != sigma_diag.size())
    throw ConfigError("beta_index: dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double d = theta[k] - mu[k];
    acc += d * d / sigma_diag[k];
  }
  return std::sqrt(acc);
}

double form_probability(std::span<const double> theta, std::span<const double> mu,
                        std::span<const double> sigma_diag) {
  return std_normal_cdf(-beta_index(theta, mu, sigma_diag));
}

double AffineThetaMap::value(std::span<const double> theta) const {
  double acc = b;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * theta[k];
  return acc;
}

double AffineThetaMap::value_grad(std::span<const double> theta, std::span<double> grad) const {
  for (std::size_t k = 0; k < a.size(); ++k) grad[k] = a[k];
  return value(theta);
}

MppResult solve_mpp(const ThetaMap& F, std::span<const double> mu,
                    std::span<const double> sigma_diag, double z, const MppSettings& settings,
                    const std::vector<double>* warm_start) {
  const int d = F.dim();
  if (static_cast<int>(mu.size()) != d || static_cast<int>(sigma_diag.size()) != d)
    throw ConfigError("solve_mpp: dimension mismatch");

  MppResult res;
  res.theta_star.assign(mu.begin(), mu.end());

  const double F_mu = F.value(mu);
  if (F_mu >= z) {
    // Constraint inactive at the mode: the mode is the MPP.
    res.lambda = 0.0;
    res.beta = 0.0;
    res.F_at_star = F_mu;
    res.converged = true;
    return res;
  }

  std::vector<double> theta =
      (warm_start && static_cast<int>(warm_start->size()) == d) ? *warm_start
                                                                : res.theta_star;

  double nu = 0.0;  // multiplier of g = z - F <= 0
  double rho = settings.penalty_init;
  std::vector<double> gradF(static_cast<std::size_t>(d));

  // Augmented Lagrangian of f = 1/2 ||theta-mu||^2 with the single inequality
  // in PHR form; the inner problems are solved with preconditioned L-BFGS
  // (Sigma is the natural metric of the quadratic part).
  auto make_fun = [&](double nu_k, double rho_k) {
    return [&, nu_k, rho_k](std::span<const double> th, std::span<double> grad) {
      const double val = F.value_grad(th, std::span<double>(gradF));
      const double g = z - val;
      double f = 0.0;
      for (int k = 0; k < d; ++k) {
        const double dk = th[k] - mu[k];
        f += 0.5 * dk * dk / sigma_diag[k];
        grad[k] = dk / sigma_diag[k];
      }
      const double t = nu_k + rho_k * g;
      if (t > 0.0) {
        f += (t * t - nu_k * nu_k) / (2.0 * rho_k);
        for (int k = 0; k < d; ++k) grad[k] -= t * gradF[k];
      } else {
        f -= nu_k * nu_k / (2.0 * rho_k);
      }
      return f;
    };
  };

  const std::vector<double> precond(sigma_diag.begin(), sigma_diag.end());
  double inner_tol = 1e-3;
  double feas_target = 1e-2;

  for (int outer = 0; outer < settings.max_outer; ++outer) {
    ++res.outer_iterations;
    LbfgsSettings ls;
    ls.max_iter = settings.max_inner;
    ls.tol_grad = inner_tol;
    ls.memory = settings.lbfgs_memory;
    const LbfgsResult sol = lbfgs_box(make_fun(nu, rho), theta, {}, {}, ls, precond);
    theta = sol.x;
    res.inner_iterations += sol.iterations;

    const double Fval = F.value_grad(theta, std::span<double>(gradF));
    const double g = z - Fval;

    // KKT residual with the current multiplier estimate
    const double nu_next = std::max(0.0, nu + rho * g);
    double kkt = 0.0;
    for (int k = 0; k < d; ++k) {
      const double r = (theta[k] - mu[k]) / sigma_diag[k] - nu_next * gradF[k];
      kkt = std::max(kkt, std::abs(r));
    }
    res.F_at_star = Fval;
    res.kkt_residual = kkt;
    // Active constraint (nu > 0) must sit on the boundary; inactive only
    // needs feasibility.
    const double viol = nu_next > 1e-12 ? std::abs(g) : std::max(g, 0.0);
    res.feas_residual = viol;

    if (viol <= settings.tol_feas && kkt <= settings.tol_kkt) {
      nu = nu_next;
      res.converged = true;
      break;
    }
    if (viol <= feas_target) {
      nu = nu_next;
      feas_target = std::max(settings.tol_feas * 0.1, feas_target * 0.1);
      inner_tol = std::max(settings.tol_kkt * 0.05, inner_tol * 0.1);
    } else {
      rho = std::min(rho * settings.penalty_growth, settings.penalty_cap);
      inner_tol = std::max(settings.tol_kkt * 0.05, inner_tol * 0.5);
    }
  }

  res.theta_star = theta;
  res.lambda = nu;
  res.beta = beta_index(theta, mu, sigma_diag);
  return res;
}

// ---------------------------------------------------------------------------

namespace {

ScalarFunctional event_functional(const SmoothEvent& ev, const Grid& grid) {
  return [&ev, &grid](const Field& rho, const Field& u, Field& dJ_drho, Field& dJ_du) {
    return ev.value_and_partials(rho, u, grid, dJ_drho, dJ_du);
  };
}

std::vector<double> theta_grad_from_collapsed(const EventContext& ctx,
                                              std::span<const double> theta,
                                              const std::vector<double>& collapsed) {
  const KLBasis& basis = *ctx.basis;
  const Grid& grid = *ctx.grid;
  std::vector<double> g(static_cast<std::size_t>(basis.d), 0.0);
  for (int k = 0; k < basis.d; ++k) {
    const double amp = std::sqrt(basis.lambdas[static_cast<std::size_t>(k)]) *
                       std::exp(theta[static_cast<std::size_t>(k)]);
    double sum = 0.0;
    for (int j = 0; j < grid.nx; ++j) {
      const double x = grid.x_center(j);
      if (!ctx.mask->active_x(x)) continue;
      sum += collapsed[static_cast<std::size_t>(j)] * basis.eigenfunction(k, x);
    }
    g[static_cast<std::size_t>(k)] = amp * sum;
  }
  return g;
}

}  // namespace

double event_value(const EventContext& ctx, const Field& u, std::span<const double> theta) {
  const SourceProfile p = source_profile(*ctx.basis, theta, *ctx.mask, *ctx.grid);
  const PdeSolution sol = forward_solve(*ctx.grid, *ctx.rho0, u, p);
  return ctx.event.value(sol.rho, u, *ctx.grid);
}

double event_value_grad_theta(const EventContext& ctx, const Field& u,
                              std::span<const double> theta, std::vector<double>& g_theta) {
  const SourceProfile p = source_profile(*ctx.basis, theta, *ctx.mask, *ctx.grid);
  const PdeSolution sol = forward_solve(*ctx.grid, *ctx.rho0, u, p);
  Field dF_drho, dF_du;
  const double f = ctx.event.value_and_partials(sol.rho, u, *ctx.grid, dF_drho, dF_du);
  const std::vector<double> collapsed =
      adjoint_source_collapsed(*ctx.grid, sol.rho, u, dF_drho, *ctx.mask);
  g_theta = theta_grad_from_collapsed(ctx, theta, collapsed);
  return f;
}

double event_value_grads(const EventContext& ctx, const Field& u, std::span<const double> theta,
                         std::vector<double>& g_theta, Field& g_u) {
  const SourceProfile p = source_profile(*ctx.basis, theta, *ctx.mask, *ctx.grid);
  const PdeSolution sol = forward_solve(*ctx.grid, *ctx.rho0, u, p);
  Field dF_drho, dF_du;
  const double f = ctx.event.value_and_partials(sol.rho, u, *ctx.grid, dF_drho, dF_du);
  const AdjointResult adj = adjoint_sweep(*ctx.grid, sol.rho, u, dF_drho, dF_du);
  g_u = adj.grad_u;

  // grad_s collapses over mask-active steps into a spatial vector.
  const Grid& grid = *ctx.grid;
  std::vector<double> collapsed(static_cast<std::size_t>(grid.nx), 0.0);
  for (int n = 0; n < grid.nt; ++n) {
    if (!ctx.mask->active_t(grid.t_node(n))) continue;
    const double* gs = adj.grad_s.row(n);
    for (int j = 0; j < grid.nx; ++j) collapsed[static_cast<std::size_t>(j)] += gs[j];
  }
  g_theta = theta_grad_from_collapsed(ctx, theta, collapsed);
  return f;
}

double event_true_max(const EventContext& ctx, const Field& u, std::span<const double> theta) {
  const SourceProfile p = source_profile(*ctx.basis, theta, *ctx.mask, *ctx.grid);
  const PdeSolution sol = forward_solve(*ctx.grid, *ctx.rho0, u, p);
  return ctx.event.true_value(sol.rho, u, *ctx.grid);
}

double PdeEventMap::value_grad(std::span<const double> theta, std::span<double> grad) const {
  std::vector<double> g;
  const double f = event_value_grad_theta(ctx_, u_, theta, g);
  for (std::size_t k = 0; k < g.size(); ++k) grad[k] = g[k];
  return f;
}

}  // namespace rarecc

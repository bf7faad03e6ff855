#include "rarecc/mc.hpp"

#include <cmath>
#include <string>

#include "rarecc/errors.hpp"
#include "rarecc/form.hpp"
#include "rarecc/pde.hpp"
#include "rarecc/risk.hpp"
#include "rarecc/util.hpp"

namespace rarecc {

namespace {

// Largest measure value over one post-step slice. For CVS the max of
// sqrt(V)/E is computed as sqrt(max V/E^2) via rolling window sums, so the
// square root runs once per row instead of once per window.
double measure_row_max(const RiskMeasure& m, const double* r, const double* un,
                       const Grid& grid) {
  const int nx = grid.nx;
  double best = -1e300;
  switch (m.kind) {
    case RiskKind::MaxDensity:
      for (int j = 0; j < nx; ++j) best = std::max(best, r[j]);
      return best;
    case RiskKind::MaxFlux:
      for (int j = 0; j < nx; ++j) best = std::max(best, r[j] * un[j]);
      return best;
    case RiskKind::MaxCVS: {
      const int W = m.window_cells;
      double mass = 0.0, p = 0.0, q = 0.0;
      for (int o = 0; o < W; ++o) {
        const int k = o % nx;
        mass += r[k];
        p += r[k] * un[k];
        q += r[k] * un[k] * un[k];
      }
      double best_ratio = -1e300;
      for (int j = 0; j < nx; ++j) {
        const double D = std::max(mass * grid.dx, m.floor);
        const double ubar = p * grid.dx / D;
        const double var = std::max((q * grid.dx - 2.0 * ubar * p * grid.dx +
                                     ubar * ubar * mass * grid.dx) /
                                        D,
                                    0.0);
        const double E = std::max(ubar, m.floor);
        best_ratio = std::max(best_ratio, var / (E * E));
        // roll the window: drop cell j, add cell j+W
        const int jd = j;
        const int ja = (j + W) % nx;
        mass += r[ja] - r[jd];
        p += r[ja] * un[ja] - r[jd] * un[jd];
        q += r[ja] * un[ja] * un[ja] - r[jd] * un[jd] * un[jd];
      }
      return std::sqrt(best_ratio);
    }
  }
  return best;
}

// Streaming forward solve tracking only the running measure maximum.
double forward_true_max(const Grid& grid, std::span<const double> rho0, const Field& u,
                        const SourceProfile& src, const RiskMeasure& m) {
  const int nx = grid.nx;
  std::vector<double> cur(rho0.begin(), rho0.end());
  std::vector<double> nxt(static_cast<std::size_t>(nx));
  const double lam = grid.dt / (2.0 * grid.dx);
  double best = -1e300;
  for (int n = 0; n < grid.nt; ++n) {
    const double* un = u.row(n);
    const double* g = src.mask.active_t(grid.t_node(n)) ? src.g.data() : nullptr;
    const double* r = cur.data();
    auto body = [&](int j, int jm, int jp) {
      double v = 0.5 * (r[jm] + r[jp]) - lam * (r[jp] * un[jp] - r[jm] * un[jm]);
      if (g) v += grid.dt * g[j];
      nxt[static_cast<std::size_t>(j)] = v;
    };
    body(0, nx - 1, 1);
    for (int j = 1; j < nx - 1; ++j) body(j, j - 1, j + 1);
    body(nx - 1, nx - 2, 0);
    best = std::max(best, measure_row_max(m, nxt.data(), un, grid));
    cur.swap(nxt);
  }
  if (!std::isfinite(best)) throw NumericalError("monte carlo: non-finite measure maximum");
  return best;
}

// theta for sample i of the validation stream; identical to the rows that
// sample_theta(basis, n, seed) would produce.
void draw_theta(const KLBasis& basis, uint64_t seed, std::size_t i, std::vector<double>& theta) {
  CounterRng rng(derive_seed(seed, i));
  theta.resize(static_cast<std::size_t>(basis.d));
  for (int k = 0; k < basis.d; ++k)
    theta[static_cast<std::size_t>(k)] =
        basis.mu_theta[static_cast<std::size_t>(k)] +
        std::sqrt(basis.sigma_theta_diag[static_cast<std::size_t>(k)]) * rng.next_normal();
}

}  // namespace

double smooth_true_gap(const Field& u, const Scenario& sc) {
  const Grid grid = make_grid(sc);
  const std::vector<double> rho0 = make_rho0(sc, grid);
  const KLBasis basis = make_basis(sc);
  const SourceProfile p = source_profile(basis, basis.mu_theta, sc.mask, grid);
  const PdeSolution sol = forward_solve(grid, rho0, u, p);
  const Field M = measure_field(sc.risk, sol.rho, u, grid);
  return true_max(M) - smooth_max(M, sc.gamma);
}

ViolationEstimate estimate_violation(const Field& u, const Scenario& sc, double z,
                                     long n_samples, uint64_t seed) {
  if (n_samples < 100) throw ConfigError("estimate_violation: need n_samples >= 100");
  const Grid grid = make_grid(sc);
  require_shape(u, grid.nt, grid.nx, "estimate_violation: u");
  const std::vector<double> rho0 = make_rho0(sc, grid);
  const KLBasis basis = make_basis(sc);

  const std::size_t n = static_cast<std::size_t>(n_samples);
  const std::size_t nb = block_count(n);
  std::vector<long> block_count_v(nb, 0);

  parallel_blocks(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    std::vector<double> theta;
    long hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      try {
        draw_theta(basis, seed, i, theta);
        const SourceProfile p = source_profile(basis, theta, sc.mask, grid);
        if (forward_true_max(grid, rho0, u, p, sc.risk) >= z) ++hits;
      } catch (const std::exception& e) {
        throw NumericalError("estimate_violation: sample " + std::to_string(i) + ": " +
                             e.what());
      }
    }
    block_count_v[b] = hits;
  });

  ViolationEstimate est;
  est.n_samples = n_samples;
  est.seed = seed;
  for (long c : block_count_v) est.n_violations += c;
  est.p_hat = static_cast<double>(est.n_violations) / static_cast<double>(n_samples);
  est.ci_half_width =
      1.96 * std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(n_samples));
  est.smooth_true_gap = smooth_true_gap(u, sc);
  return est;
}

std::vector<double> max_measure_distribution(const Field& u, const Scenario& sc, long n_samples,
                                             uint64_t seed) {
  if (n_samples < 1) throw ConfigError("max_measure_distribution: need n_samples >= 1");
  const Grid grid = make_grid(sc);
  require_shape(u, grid.nt, grid.nx, "max_measure_distribution: u");
  const std::vector<double> rho0 = make_rho0(sc, grid);
  const KLBasis basis = make_basis(sc);

  std::vector<double> out(static_cast<std::size_t>(n_samples));
  parallel_blocks(out.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> theta;
    for (std::size_t i = begin; i < end; ++i) {
      draw_theta(basis, seed, i, theta);
      const SourceProfile p = source_profile(basis, theta, sc.mask, grid);
      out[i] = forward_true_max(grid, rho0, u, p, sc.risk);
    }
  });
  return out;
}

ViolationEstimate estimate_violation_map(
    const std::function<double(std::span<const double>)>& event_map, const KLBasis& basis,
    double z, long n_samples, uint64_t seed) {
  if (n_samples < 100) throw ConfigError("estimate_violation_map: need n_samples >= 100");
  const std::size_t n = static_cast<std::size_t>(n_samples);
  const std::size_t nb = block_count(n);
  std::vector<long> block_hits(nb, 0);
  parallel_blocks(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    std::vector<double> theta;
    long hits = 0;
    for (std::size_t i = begin; i < end; ++i) {
      draw_theta(basis, seed, i, theta);
      if (event_map(theta) >= z) ++hits;
    }
    block_hits[b] = hits;
  });
  ViolationEstimate est;
  est.n_samples = n_samples;
  est.seed = seed;
  for (long c : block_hits) est.n_violations += c;
  est.p_hat = static_cast<double>(est.n_violations) / static_cast<double>(n_samples);
  est.ci_half_width =
      1.96 * std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(n_samples));
  return est;
}

}  // namespace rarecc

#ifndef RARECC_RANDFIELD_HPP
#define RARECC_RANDFIELD_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "rarecc/grid.hpp"

namespace rarecc {

// Space-time on/off window of the source term. Spatially [x_lo, x_hi];
// in time either a single interval [0, t_on) or, when `periodic`, the first
// t_on seconds of every t_period.
struct Mask {
  double x_lo = 0.4;
  double x_hi = 0.6;
  double t_on = 0.5;
  double t_period = 1.0;
  bool periodic = true;

  bool active_x(double x) const { return x >= x_lo && x <= x_hi; }
  bool active_t(double t) const;
  bool active(double x, double t) const { return active_x(x) && active_t(t); }

  bool operator==(const Mask&) const = default;
};

void validate_mask(const Mask& m, double L);

// One eigenpair of the exponential covariance kernel on [0, L]: a cosine or
// sine about the midpoint with frequency w and L2 normalization `norm`.
struct KlMode {
  double w = 0.0;
  double norm = 1.0;
  bool even = true;
};

// Truncated Karhunen-Loeve basis of C(x,y) = sigma2 * exp(-|x-y|/l_c),
// plus the Gaussian law of the coefficient vector theta.
struct KLBasis {
  int d = 0;
  double sigma2 = 1.0;
  double l_c = 0.5;
  double L = 1.0;
  double mu_s = 0.1;
  std::vector<double> lambdas;           // decreasing, > 0
  std::vector<KlMode> modes;             // parallel to lambdas
  std::vector<double> mu_theta;          // d entries
  std::vector<double> sigma_theta_diag;  // d marginal variances

  double eigenfunction(int k, double x) const;

  bool operator==(const KLBasis&) const = default;
};

// Analytic eigenpairs via bisection on the standard branch brackets.
// The Gaussian law defaults to mu_theta = mu_theta_fill * 1 and
// Sigma_theta = sigma_theta * I.
KLBasis kl_basis(double sigma2, double l_c, double L, int d, double mu_s = 0.1,
                 double mu_theta_fill = -0.5, double sigma_theta = 0.1);

// Row-major n x d matrix of theta samples.
struct ThetaMatrix {
  int n = 0;
  int d = 0;
  std::vector<double> v;

  std::span<const double> row(int i) const {
    return {v.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
  }
  std::span<double> row(int i) {
    return {v.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
  }
};

// i.i.d. Gaussian rows; row i depends only on (seed, i), not on n.
ThetaMatrix sample_theta(const KLBasis& basis, int n, uint64_t seed);

// Spatial source profile for one theta: s(x,t) = g(x) * 1_active(t) where
// g folds the spatial mask indicator in. The time factor is the mask's.
struct SourceProfile {
  std::vector<double> g;  // nx entries
  Mask mask;

  double value(const Grid& grid, int n, int j) const {
    return mask.active_t(grid.t_node(n)) ? g[static_cast<std::size_t>(j)] : 0.0;
  }
};

SourceProfile source_profile(const KLBasis& basis, std::span<const double> theta,
                             const Mask& mask, const Grid& grid);

// Materialized per-step source field (nt x nx).
Field realize_source(const KLBasis& basis, std::span<const double> theta, const Mask& mask,
                     const Grid& grid);

}  // namespace rarecc

#endif  // RARECC_RANDFIELD_HPP

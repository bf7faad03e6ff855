#include "rarecc/randfield.hpp"

#include <cmath>
#include <string>

#include "rarecc/errors.hpp"
#include "rarecc/util.hpp"

namespace rarecc {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;

// Sign-stable residuals for the transcendental eigenvalue equations on
// [-a, a]. Multiplying through by cos(w a) removes the tan singularity at
// the bracket ends, so plain bisection applies.
double even_residual(double w, double a, double c) {
  return c * std::cos(w * a) - w * std::sin(w * a);
}
double odd_residual(double w, double a, double c) {
  return w * std::cos(w * a) + c * std::sin(w * a);
}

double bisect(double lo, double hi, double a, double c, bool even) {
  auto f = [&](double w) { return even ? even_residual(w, a, c) : odd_residual(w, a, c); };
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (flo * fhi > 0.0)
    throw InternalError("kl_basis: no sign change in eigenvalue bracket [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if (flo * fm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
    if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}
}  // namespace

bool Mask::active_t(double t) const {
  if (!periodic) return t >= 0.0 && t < t_on;
  if (t < 0.0) return false;
  const double phase = t - t_period * std::floor(t / t_period);
  return phase < t_on;
}

void validate_mask(const Mask& m, double L) {
  if (!(m.x_lo >= 0.0 && m.x_lo < m.x_hi && m.x_hi <= L))
    throw ConfigError("mask: need 0 <= x_lo < x_hi <= L");
  if (!(m.t_on > 0.0)) throw ConfigError("mask: t_on must be positive");
  if (m.periodic && !(m.t_on <= m.t_period))
    throw ConfigError("mask: t_on must not exceed t_period");
}

double KLBasis::eigenfunction(int k, double x) const {
  const KlMode& m = modes[static_cast<std::size_t>(k)];
  const double xc = x - 0.5 * L;
  return (m.even ? std::cos(m.w * xc) : std::sin(m.w * xc)) / m.norm;
}

KLBasis kl_basis(double sigma2, double l_c, double L, int d, double mu_s, double mu_theta_fill,
                 double sigma_theta) {
  if (!(sigma2 > 0.0)) throw ConfigError("kl_basis: sigma2 must be positive");
  if (!(l_c > 0.0)) throw ConfigError("kl_basis: l_c must be positive");
  if (!(L > 0.0)) throw ConfigError("kl_basis: L must be positive");
  if (d < 1) throw ConfigError("kl_basis: d must be >= 1");
  if (!(sigma_theta >= 0.0)) throw ConfigError("kl_basis: sigma_theta must be nonnegative");

  const double a = 0.5 * L;
  const double c = 1.0 / l_c;

  // Even roots live in w*a in ((m-1)pi, (m-1/2)pi), odd in ((m-1/2)pi, m*pi).
  // Interleaving in w means interleaving in lambda, so generating ceil(d/2)
  // branches of each family covers the first d modes.
  const int branches = d / 2 + 1;
  struct Pair {
    double w;
    bool even;
  };
  std::vector<Pair> roots;
  roots.reserve(2 * static_cast<std::size_t>(branches));
  const double eps = 1e-9;
  for (int m = 1; m <= branches; ++m) {
    const double w_even =
        bisect(((m - 1) * kPi + eps) / a, ((m - 0.5) * kPi - eps) / a, a, c, true);
    const double w_odd = bisect(((m - 0.5) * kPi + eps) / a, (m * kPi - eps) / a, a, c, false);
    roots.push_back({w_even, true});
    roots.push_back({w_odd, false});
  }
  std::sort(roots.begin(), roots.end(), [](const Pair& x, const Pair& y) { return x.w < y.w; });

  KLBasis basis;
  basis.d = d;
  basis.sigma2 = sigma2;
  basis.l_c = l_c;
  basis.L = L;
  basis.mu_s = mu_s;
  basis.lambdas.reserve(static_cast<std::size_t>(d));
  basis.modes.reserve(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const Pair& p = roots[static_cast<std::size_t>(k)];
    const double lambda = 2.0 * c * sigma2 / (p.w * p.w + c * c);
    const double s2wa = std::sin(2.0 * p.w * a) / (2.0 * p.w);
    const double norm2 = p.even ? (a + s2wa) : (a - s2wa);
    if (!(lambda > 0.0) || !(norm2 > 0.0))
      throw InternalError("kl_basis: degenerate eigenpair at k=" + std::to_string(k));
    basis.lambdas.push_back(lambda);
    basis.modes.push_back({p.w, std::sqrt(norm2), p.even});
  }
  basis.mu_theta.assign(static_cast<std::size_t>(d), mu_theta_fill);
  basis.sigma_theta_diag.assign(static_cast<std::size_t>(d), sigma_theta);
  return basis;
}

ThetaMatrix sample_theta(const KLBasis& basis, int n, uint64_t seed) {
  if (n < 1) throw ConfigError("sample_theta: n must be >= 1");
  ThetaMatrix m;
  m.n = n;
  m.d = basis.d;
  m.v.resize(static_cast<std::size_t>(n) * basis.d);
  parallel_blocks(static_cast<std::size_t>(n), [&](std::size_t, std::size_t begin,
                                                   std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      CounterRng rng(derive_seed(seed, i));
      double* row = m.v.data() + i * static_cast<std::size_t>(basis.d);
      for (int k = 0; k < basis.d; ++k) {
        row[k] = basis.mu_theta[static_cast<std::size_t>(k)] +
                 std::sqrt(basis.sigma_theta_diag[static_cast<std::size_t>(k)]) *
                     rng.next_normal();
      }
    }
  });
  return m;
}

SourceProfile source_profile(const KLBasis& basis, std::span<const double> theta,
                             const Mask& mask, const Grid& grid) {
  if (static_cast<int>(theta.size()) != basis.d)
    throw ConfigError("source_profile: theta size mismatch");
  for (double t : theta)
    if (!std::isfinite(t)) throw NumericalError("source_profile: non-finite theta");

  SourceProfile p;
  p.mask = mask;
  p.g.assign(static_cast<std::size_t>(grid.nx), 0.0);
  std::vector<double> amp(static_cast<std::size_t>(basis.d));
  for (int k = 0; k < basis.d; ++k)
    amp[static_cast<std::size_t>(k)] =
        std::sqrt(basis.lambdas[static_cast<std::size_t>(k)]) * std::exp(theta[k]);
  for (int j = 0; j < grid.nx; ++j) {
    const double x = grid.x_center(j);
    if (!mask.active_x(x)) continue;
    double s = basis.mu_s;
    for (int k = 0; k < basis.d; ++k)
      s += amp[static_cast<std::size_t>(k)] * basis.eigenfunction(k, x);
    p.g[static_cast<std::size_t>(j)] = s;
  }
  return p;
}

Field realize_source(const KLBasis& basis, std::span<const double> theta, const Mask& mask,
                     const Grid& grid) {
  const SourceProfile p = source_profile(basis, theta, mask, grid);
  Field s = Field::steps(grid);
  for (int n = 0; n < grid.nt; ++n) {
    if (!mask.active_t(grid.t_node(n))) continue;
    double* row = s.row(n);
    for (int j = 0; j < grid.nx; ++j) row[j] = p.g[static_cast<std::size_t>(j)];
  }
  return s;
}

}  // namespace rarecc

#include "rarecc/risk.hpp"

#include <cmath>
#include <string>

#include "rarecc/errors.hpp"

namespace rarecc {

const char* risk_kind_name(RiskKind k) {
  switch (k) {
    case RiskKind::MaxDensity: return "max_density";
    case RiskKind::MaxCVS: return "max_cvs";
    case RiskKind::MaxFlux: return "max_flux";
  }
  return "?";
}

RiskKind risk_kind_from_name(const std::string& name) {
  if (name == "max_density") return RiskKind::MaxDensity;
  if (name == "max_cvs") return RiskKind::MaxCVS;
  if (name == "max_flux") return RiskKind::MaxFlux;
  throw ConfigError("unknown risk measure '" + name +
                    "' (expected max_density, max_cvs, or max_flux)");
}

namespace {

void check_measure_inputs(const RiskMeasure& m, const Field& rho, const Field& u,
                          const Grid& grid) {
  require_shape(rho, grid.nt + 1, grid.nx, "measure_field: rho");
  require_shape(u, grid.nt, grid.nx, "measure_field: u");
  if (m.kind == RiskKind::MaxCVS) {
    if (m.window_cells < 2) throw ConfigError("measure_field: CVS window must be >= 2 cells");
    if (!(m.floor > 0.0)) throw ConfigError("measure_field: CVS floor must be positive");
  }
}

// Forward CVS for one window starting at cell j of measure row n.
struct CvsWindow {
  double mass, p, ubar, s, var, cvs;
  double denom_mass, denom_mean;  // after the floor guards
};

CvsWindow cvs_forward(const RiskMeasure& m, const double* r, const double* un, const Grid& grid,
                      int j) {
  CvsWindow w{};
  const int nx = grid.nx;
  double mass = 0.0, p = 0.0;
  for (int o = 0; o < m.window_cells; ++o) {
    const int k = (j + o) % nx;
    mass += r[k] * grid.dx;
    p += r[k] * un[k] * grid.dx;
  }
  const double D = std::max(mass, m.floor);
  const double ubar = p / D;
  double s = 0.0;
  for (int o = 0; o < m.window_cells; ++o) {
    const int k = (j + o) % nx;
    const double du = un[k] - ubar;
    s += r[k] * du * du * grid.dx;
  }
  const double var = s / D;
  const double E = std::max(ubar, m.floor);
  w.mass = mass;
  w.p = p;
  w.ubar = ubar;
  w.s = s;
  w.var = var;
  w.denom_mass = D;
  w.denom_mean = E;
  w.cvs = std::sqrt(std::max(var, 0.0)) / E;
  return w;
}

}  // namespace

Field measure_field(const RiskMeasure& m, const Field& rho, const Field& u, const Grid& grid) {
  check_measure_inputs(m, rho, u, grid);
  Field M = Field::steps(grid);
  const int nx = grid.nx;
  for (int n = 0; n < grid.nt; ++n) {
    const double* r = rho.row(n + 1);
    const double* un = u.row(n);
    double* out = M.row(n);
    switch (m.kind) {
      case RiskKind::MaxDensity:
        for (int j = 0; j < nx; ++j) out[j] = r[j];
        break;
      case RiskKind::MaxFlux:
        for (int j = 0; j < nx; ++j) out[j] = r[j] * un[j];
        break;
      case RiskKind::MaxCVS:
        for (int j = 0; j < nx; ++j) out[j] = cvs_forward(m, r, un, grid, j).cvs;
        break;
    }
  }
  return M;
}

void measure_vjp(const RiskMeasure& m, const Field& rho, const Field& u, const Grid& grid,
                 const Field& Mbar, Field& rho_bar, Field& u_bar) {
  check_measure_inputs(m, rho, u, grid);
  require_shape(Mbar, grid.nt, grid.nx, "measure_vjp: Mbar");
  require_shape(rho_bar, grid.nt + 1, grid.nx, "measure_vjp: rho_bar");
  require_shape(u_bar, grid.nt, grid.nx, "measure_vjp: u_bar");

  const int nx = grid.nx;
  for (int n = 0; n < grid.nt; ++n) {
    const double* r = rho.row(n + 1);
    const double* un = u.row(n);
    const double* mb = Mbar.row(n);
    double* rb = rho_bar.row(n + 1);
    double* ub = u_bar.row(n);
    switch (m.kind) {
      case RiskKind::MaxDensity:
        for (int j = 0; j < nx; ++j) rb[j] += mb[j];
        break;
      case RiskKind::MaxFlux:
        for (int j = 0; j < nx; ++j) {
          rb[j] += mb[j] * un[j];
          ub[j] += mb[j] * r[j];
        }
        break;
      case RiskKind::MaxCVS:
        for (int j = 0; j < nx; ++j) {
          const double wbar = mb[j];
          if (wbar == 0.0) continue;
          const CvsWindow w = cvs_forward(m, r, un, grid, j);

          // Reverse of cvs = sqrt(var)/E, var = s/D, ubar = p/D, with the
          // max-guards handled piecewise.
          double d_var = 0.0;
          if (w.var > 0.0) d_var = wbar / (2.0 * std::sqrt(w.var) * w.denom_mean);
          double d_ubar = 0.0;
          if (w.ubar > m.floor)
            d_ubar -= wbar * std::sqrt(std::max(w.var, 0.0)) / (w.denom_mean * w.denom_mean);

          const double d_s = d_var / w.denom_mass;
          double d_D = -d_var * w.s / (w.denom_mass * w.denom_mass);

          // s = sum r (u - ubar)^2 dx contributes to ubar as well.
          const double t2 = w.p - w.ubar * w.mass;  // sum r (u - ubar) dx
          d_ubar += d_s * (-2.0) * t2;

          const double d_p = d_ubar / w.denom_mass;
          d_D += -d_ubar * w.p / (w.denom_mass * w.denom_mass);
          const double d_mass = (w.mass > m.floor) ? d_D : 0.0;

          for (int o = 0; o < m.window_cells; ++o) {
            const int k = (j + o) % nx;
            const double du = un[k] - w.ubar;
            rb[k] += (d_s * du * du + d_p * un[k] + d_mass) * grid.dx;
            ub[k] += (d_s * 2.0 * r[k] * du + d_p * r[k]) * grid.dx;
          }
        }
        break;
    }
  }
}

double smooth_max(const Field& M, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("smooth_max: gamma must be positive");
  if (!M.all_finite()) throw NumericalError("smooth_max: non-finite measure field");
  const double m_star = M.max_value();
  double acc = 0.0;
  for (double x : M.values()) acc += std::exp((x - m_star) / gamma);
  return m_star + gamma * std::log(acc / static_cast<double>(M.size()));
}

Field smooth_max_grad(const Field& M, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("smooth_max_grad: gamma must be positive");
  const double m_star = M.max_value();
  Field g(M.rows(), M.cols());
  double acc = 0.0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    const double e = std::exp((M.data()[i] - m_star) / gamma);
    g.data()[i] = e;
    acc += e;
  }
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] /= acc;
  return g;
}

double true_max(const Field& M) { return M.max_value(); }

double softplus(double y, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("softplus: epsilon must be positive");
  const double t = y / epsilon;
  if (t > 30.0) return y + epsilon * std::log1p(std::exp(-t));
  return epsilon * std::log1p(std::exp(t));
}

double softplus_sigmoid(double y, double epsilon) {
  const double t = y / epsilon;
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double SmoothEvent::value(const Field& rho, const Field& u, const Grid& grid) const {
  return smooth_max(measure_field(measure, rho, u, grid), gamma);
}

double SmoothEvent::value_and_partials(const Field& rho, const Field& u, const Grid& grid,
                                       Field& dF_drho, Field& dF_du) const {
  const Field M = measure_field(measure, rho, u, grid);
  const double f = smooth_max(M, gamma);
  const Field w = smooth_max_grad(M, gamma);
  dF_drho = Field::state(grid);
  dF_du = Field::steps(grid);
  measure_vjp(measure, rho, u, grid, w, dF_drho, dF_du);
  return f;
}

double SmoothEvent::true_value(const Field& rho, const Field& u, const Grid& grid) const {
  return true_max(measure_field(measure, rho, u, grid));
}

}  // namespace rarecc

#include "rarecc/grid.hpp"

#include <cmath>
#include <string>

#include "rarecc/errors.hpp"

namespace rarecc {

Grid build_grid(double L, double T, int nx, double cfl, double u_max) {
  if (!(L > 0.0)) throw ConfigError("grid: L must be positive, got " + std::to_string(L));
  if (!(T > 0.0)) throw ConfigError("grid: T must be positive, got " + std::to_string(T));
  if (nx < 4) throw ConfigError("grid: nx must be >= 4, got " + std::to_string(nx));
  if (!(cfl > 0.0 && cfl <= 1.0))
    throw ConfigError("grid: cfl must lie in (0, 1], got " + std::to_string(cfl));
  if (!(u_max > 0.0))
    throw ConfigError("grid: u_max must be positive, got " + std::to_string(u_max));

  Grid g;
  g.L = L;
  g.T = T;
  g.nx = nx;
  g.cfl = cfl;
  g.u_max = u_max;
  g.dx = L / nx;
  g.dt = cfl * g.dx / u_max;

  // Smallest nt with nt*dt >= T; ceil(T/dt) up to floating-point noise.
  long long nt = static_cast<long long>(std::floor(T / g.dt));
  if (static_cast<double>(nt) * g.dt < T) ++nt;
  g.nt = static_cast<int>(nt);
  return g;
}

Field::Field(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, fill) {}

Field Field::state(const Grid& g, double fill) { return Field(g.nt + 1, g.nx, fill); }
Field Field::steps(const Grid& g, double fill) { return Field(g.nt, g.nx, fill); }

bool Field::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

double Field::max_value() const {
  double m = -1e300;
  for (double x : v_)
    if (x > m) m = x;
  return m;
}

void Field::fill(double v) {
  for (double& x : v_) x = v;
}

void require_shape(const Field& f, int rows, int cols, const char* what) {
  if (f.rows() != rows || f.cols() != cols)
    throw ConfigError(std::string(what) + ": expected shape " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", got " + std::to_string(f.rows()) + "x" +
                      std::to_string(f.cols()));
}

void require_finite(const Field& f, const char* what) {
  if (!f.all_finite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

double integrate(const Field& f, const Grid& g) {
  double s = 0.0;
  for (double x : f.values()) s += x;
  return s * g.cell_weight();
}

}  // namespace rarecc

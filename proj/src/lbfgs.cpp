#include "rarecc/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "rarecc/errors.hpp"

namespace rarecc {

namespace {

inline double clampv(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

struct Pair {
  std::vector<double> s, y;
  double rho;  // 1 / (y.s)
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

LbfgsResult lbfgs_box(const FunGrad& fg, std::vector<double> x0, const std::vector<double>& lo,
                      const std::vector<double>& hi, const LbfgsSettings& settings,
                      const std::vector<double>& precond,
                      const std::function<void(int, double)>& on_accept) {
  const std::size_t n = x0.size();
  const double inf = std::numeric_limits<double>::infinity();
  if (!lo.empty() && lo.size() != n) throw ConfigError("lbfgs_box: lo size mismatch");
  if (!hi.empty() && hi.size() != n) throw ConfigError("lbfgs_box: hi size mismatch");
  if (!precond.empty() && precond.size() != n)
    throw ConfigError("lbfgs_box: precond size mismatch");

  auto lob = [&](std::size_t i) { return lo.empty() ? -inf : lo[i]; };
  auto hib = [&](std::size_t i) { return hi.empty() ? inf : hi[i]; };
  auto pc = [&](std::size_t i) { return precond.empty() ? 1.0 : precond[i]; };

  auto project = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < n; ++i) x[i] = clampv(x[i], lob(i), hib(i));
  };

  LbfgsResult res;
  project(x0);
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n), g_new(n), d(n), x_new(n);

  auto eval = [&](const std::vector<double>& xx, std::vector<double>& gg) {
    const double f = fg(std::span<const double>(xx), std::span<double>(gg));
    ++res.n_evals;
    if (!std::isfinite(f)) throw NumericalError("lbfgs_box: non-finite objective value");
    for (double v : gg)
      if (!std::isfinite(v)) throw NumericalError("lbfgs_box: non-finite gradient entry");
    return f;
  };

  double f = eval(x, g);

  // preconditioned projected gradient, the termination quantity
  auto pg_inf_norm = [&]() {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double step = clampv(x[i] - pc(i) * g[i], lob(i), hib(i)) - x[i];
      m = std::max(m, std::abs(step));
    }
    return m;
  };

  std::deque<Pair> pairs;
  double gamma = 1.0;

  for (int it = 0; it < settings.max_iter; ++it) {
    res.pg_norm = pg_inf_norm();
    if (res.pg_norm <= settings.tol_grad) {
      res.converged = true;
      break;
    }
    if (settings.max_evals > 0 && res.n_evals >= settings.max_evals) break;

    // two-loop recursion with H0 = gamma * diag(precond)
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
    std::vector<double> alpha_memo(pairs.size());
    for (std::size_t k = pairs.size(); k-- > 0;) {
      const Pair& p = pairs[k];
      const double a = p.rho * dot(p.s, d);
      alpha_memo[k] = a;
      for (std::size_t i = 0; i < n; ++i) d[i] -= a * p.y[i];
    }
    for (std::size_t i = 0; i < n; ++i) d[i] *= gamma * pc(i);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Pair& p = pairs[k];
      const double b = p.rho * dot(p.y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha_memo[k] - b) * p.s[i];
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        // quasi-Newton direction failed; fall back to scaled steepest descent
        pairs.clear();
        for (std::size_t i = 0; i < n; ++i) d[i] = -pc(i) * g[i];
      }
      double step = 1.0;
      for (int bt = 0; bt < settings.max_backtracks; ++bt) {
        for (std::size_t i = 0; i < n; ++i)
          x_new[i] = clampv(x[i] + step * d[i], lob(i), hib(i));
        double dir_deriv = 0.0;
        double move = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dx = x_new[i] - x[i];
          dir_deriv += g[i] * dx;
          move = std::max(move, std::abs(dx));
        }
        if (move == 0.0) break;  // projection pinned every coordinate
        if (dir_deriv > 0.0) {
          step *= 0.5;
          continue;
        }
        const double f_new = eval(x_new, g_new);
        if (f_new <= f + settings.c1 * dir_deriv) {
          // curvature update
          Pair p;
          p.s.resize(n);
          p.y.resize(n);
          for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = x_new[i] - x[i];
            p.y[i] = g_new[i] - g[i];
          }
          const double sy = dot(p.s, p.y);
          if (sy > 1e-10 * norm2(p.s) * norm2(p.y)) {
            p.rho = 1.0 / sy;
            double ypy = 0.0;
            for (std::size_t i = 0; i < n; ++i) ypy += p.y[i] * pc(i) * p.y[i];
            if (ypy > 0.0) gamma = sy / ypy;
            pairs.push_back(std::move(p));
            if (static_cast<int>(pairs.size()) > settings.memory) pairs.pop_front();
          }
          x.swap(x_new);
          g.swap(g_new);
          f = f_new;
          accepted = true;
          ++res.iterations;
          if (on_accept) on_accept(res.iterations, f);
          break;
        }
        step *= 0.5;
        if (settings.max_evals > 0 && res.n_evals >= settings.max_evals) break;
      }
      if (settings.max_evals > 0 && res.n_evals >= settings.max_evals) break;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
  }

  res.pg_norm = pg_inf_norm();
  if (res.pg_norm <= settings.tol_grad) res.converged = true;
  res.x = std::move(x);
  res.f = f;
  return res;
}

}  // namespace rarecc

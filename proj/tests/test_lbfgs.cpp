#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "rarecc/errors.hpp"
#include "rarecc/lbfgs.hpp"

using namespace rarecc;

TEST_CASE("convex quadratic converges to the center") {
  const std::vector<double> c = {1.0, -2.0, 0.5, 3.0, -0.25};
  const FunGrad fg = [&](std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - c[i];
      f += 0.5 * d * d;
      g[i] = d;
    }
    return f;
  };
  LbfgsSettings s;
  s.tol_grad = 1e-10;
  s.max_iter = 50;
  const LbfgsResult r = lbfgs_box(fg, std::vector<double>(5, 0.0), {}, {}, s);
  CHECK(r.converged);
  CHECK(r.iterations <= 50);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(r.x[i] - c[i]) < 1e-8);
}

TEST_CASE("bounded quadratic converges to the box projection of the center") {
  const std::vector<double> c = {2.0, -3.0, 0.25};
  const FunGrad fg = [&](std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - c[i];
      f += 0.5 * d * d;
      g[i] = d;
    }
    return f;
  };
  const std::vector<double> lo = {0.0, 0.0, 0.0};
  const std::vector<double> hi = {1.0, 1.0, 1.0};
  LbfgsSettings s;
  s.tol_grad = 1e-10;
  const LbfgsResult r = lbfgs_box(fg, {0.5, 0.5, 0.5}, lo, hi, s);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-10));   // clamped above
  CHECK(r.x[1] == doctest::Approx(0.0).epsilon(1e-10));   // clamped below
  CHECK(r.x[2] == doctest::Approx(0.25).epsilon(1e-8));   // interior
}

TEST_CASE("Rosenbrock from the classic start") {
  const FunGrad fg = [](std::span<const double> x, std::span<double> g) {
    const double a = x[0], b = x[1];
    const double f = 100.0 * (b - a * a) * (b - a * a) + (1.0 - a) * (1.0 - a);
    g[0] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
    g[1] = 200.0 * (b - a * a);
    return f;
  };
  LbfgsSettings s;
  s.tol_grad = 1e-9;
  s.max_iter = 300;
  const LbfgsResult r = lbfgs_box(fg, {-1.2, 1.0}, {}, {}, s);
  CHECK(r.converged);
  CHECK(std::hypot(r.x[0] - 1.0, r.x[1] - 1.0) < 1e-5);
}

TEST_CASE("monotone descent on accepted iterates") {
  const FunGrad fg = [](std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      f += std::cos(x[i]) + 0.1 * x[i] * x[i];
      g[i] = -std::sin(x[i]) + 0.2 * x[i];
    }
    return f;
  };
  std::vector<double> history;
  LbfgsSettings s;
  s.tol_grad = 1e-8;
  lbfgs_box(fg, {2.0, -1.0, 0.5, 4.0}, {}, {}, s, {},
            [&](int, double f) { history.push_back(f); });
  REQUIRE(history.size() > 1);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1] + 1e-15);
}

TEST_CASE("diagonal preconditioning preserves the minimizer") {
  // badly scaled quadratic
  const FunGrad fg = [](std::span<const double> x, std::span<double> g) {
    const double f = 0.5 * (1e6 * x[0] * x[0] + 1e-2 * x[1] * x[1]);
    g[0] = 1e6 * x[0];
    g[1] = 1e-2 * x[1];
    return f;
  };
  LbfgsSettings s;
  s.tol_grad = 1e-9;
  const std::vector<double> precond = {1e-6, 1e2};
  const LbfgsResult r = lbfgs_box(fg, {1.0, 1.0}, {}, {}, s, precond);
  CHECK(r.converged);
  CHECK(std::abs(r.x[0]) < 1e-6);
  CHECK(std::abs(r.x[1]) < 1e-3);
}

TEST_CASE("non-finite objective aborts with a diagnostic") {
  const FunGrad fg = [](std::span<const double> x, std::span<double> g) {
    g[0] = 1.0;
    return x[0] > 0.5 ? std::numeric_limits<double>::quiet_NaN() : x[0];
  };
  CHECK_THROWS_AS(lbfgs_box(fg, {1.0}, {}, {}, LbfgsSettings{}), NumericalError);
}

#include <doctest.h>

#include <vector>

#include "rarecc/errors.hpp"
#include "rarecc/grid.hpp"

using namespace rarecc;

TEST_CASE("build_grid computes dx, dt, nt from the CFL tie") {
  SUBCASE("default-scale case") {
    const Grid g = build_grid(1.0, 5.0, 100, 0.5, 1.0);
    CHECK(g.dx == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(g.dt == doctest::Approx(0.005).epsilon(1e-15));
    CHECK(g.nt == 1000);
  }
  SUBCASE("identity-scale case") {
    const Grid g = build_grid(1.0, 1.0, 4, 1.0, 1.0);
    CHECK(g.dx == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.dt == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g.nt == 4);
  }
  SUBCASE("recomputed by hand") {
    const Grid g = build_grid(2.0, 3.0, 50, 0.5, 1.0);
    CHECK(g.dx == doctest::Approx(0.04).epsilon(1e-15));
    CHECK(g.dt == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(g.nt == 150);
  }
}

TEST_CASE("grid invariants") {
  const Grid g = build_grid(1.3, 2.7, 37, 0.5, 0.9);
  CHECK(g.dt == g.cfl * g.dx / g.u_max);
  CHECK(g.nt * g.dt >= g.T);
  CHECK((g.nt - 1) * g.dt < g.T);
}

TEST_CASE("build_grid rejects bad inputs naming the field") {
  CHECK_THROWS_WITH_AS(build_grid(-1.0, 5.0, 100, 0.5, 1.0),
                       doctest::Contains("L must be positive"), ConfigError);
  CHECK_THROWS_WITH_AS(build_grid(1.0, 0.0, 100, 0.5, 1.0),
                       doctest::Contains("T must be positive"), ConfigError);
  CHECK_THROWS_WITH_AS(build_grid(1.0, 5.0, 3, 0.5, 1.0), doctest::Contains("nx"), ConfigError);
  CHECK_THROWS_WITH_AS(build_grid(1.0, 5.0, 100, 1.5, 1.0), doctest::Contains("cfl"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(build_grid(1.0, 5.0, 100, 0.5, 0.0), doctest::Contains("u_max"),
                       ConfigError);
}

TEST_CASE("periodic wrap is a bijection on 0..nx-1") {
  const Grid g = build_grid(1.0, 1.0, 7, 0.5, 1.0);
  for (long long shift : {-3LL, -1LL, 0LL, 1LL, 5LL, 700LL, -700LL}) {
    std::vector<int> seen(7, 0);
    for (long long j = 0; j < 7; ++j) {
      const int w = g.wrap(j + shift);
      REQUIRE(w >= 0);
      REQUIRE(w < 7);
      ++seen[static_cast<std::size_t>(w)];
    }
    for (int c : seen) CHECK(c == 1);
  }
}

TEST_CASE("quadrature of constant field equals c*L*(nt*dt)") {
  const Grid g = build_grid(2.0, 3.0, 50, 0.5, 1.0);
  const double c = 1.7;
  const Field f = Field::steps(g, c);
  const double want = c * g.L * (g.nt * g.dt);
  CHECK(integrate(f, g) == doctest::Approx(want).epsilon(1e-13));
}

TEST_CASE("field constructors enforce state vs step shapes") {
  const Grid g = build_grid(1.0, 1.0, 8, 0.5, 1.0);
  const Field state = Field::state(g);
  const Field steps = Field::steps(g);
  CHECK(state.rows() == g.nt + 1);
  CHECK(steps.rows() == g.nt);
  CHECK(state.cols() == g.nx);
  CHECK_THROWS_AS(require_shape(steps, g.nt + 1, g.nx, "t"), ConfigError);
  CHECK_NOTHROW(require_shape(state, g.nt + 1, g.nx, "t"));
}

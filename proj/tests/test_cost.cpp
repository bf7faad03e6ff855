#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rarecc/cost.hpp"
#include "rarecc/grid.hpp"
#include "rarecc/scenarios.hpp"
#include "test_helpers.hpp"

using namespace rarecc;
using rarecc::test::coarse_scenario;
using rarecc::test::grad_err;
using rarecc::test::random_field;

namespace {

Grid default_grid() { return build_grid(1.0, 5.0, 100, 0.5, 1.0); }

}  // namespace

TEST_CASE("equilibrium cost") {
  const Grid g = default_grid();

  SUBCASE("perfect tracking gives zero") {
    std::mt19937 rng(3);
    const Field rho = random_field(g.nt + 1, g.nx, rng, 0.0, 1.0);
    Field u = Field::steps(g);
    for (int n = 0; n < g.nt; ++n)
      for (int j = 0; j < g.nx; ++j) u.at(n, j) = 1.0 - rho.at(n, j);
    CHECK(equilibrium_cost(rho, u, g) == doctest::Approx(0.0).epsilon(1e-14));
  }

  SUBCASE("zero density gives zero for any control") {
    std::mt19937 rng(5);
    const Field rho = Field::state(g, 0.0);
    const Field u = random_field(g.nt, g.nx, rng, 0.0, 1.0);
    CHECK(equilibrium_cost(rho, u, g) == 0.0);
  }

  SUBCASE("constant-field quadrature") {
    const Field rho = Field::state(g, 0.2);
    const Field u = Field::steps(g, 1.0);
    CHECK(equilibrium_cost(rho, u, g) == doctest::Approx(0.02).epsilon(1e-12));
  }

  SUBCASE("always nonnegative") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
      const Field rho = random_field(g.nt + 1, g.nx, rng, 0.0, 1.0);
      const Field u = random_field(g.nt, g.nx, rng, 0.0, 1.0);
      CHECK(equilibrium_cost(rho, u, g) >= 0.0);
    }
  }
}

TEST_CASE("nonseparable cost") {
  const Grid g = default_grid();

  SUBCASE("at equilibrium only the separable part remains") {
    std::mt19937 rng(9);
    const Field rho = random_field(g.nt + 1, g.nx, rng, 0.0, 1.0);
    Field u = Field::steps(g);
    double want = 0.0;
    for (int n = 0; n < g.nt; ++n)
      for (int j = 0; j < g.nx; ++j) {
        u.at(n, j) = 1.0 - rho.at(n, j);
        const double uu = 1.0 - rho.at(n, j);
        want -= 0.5 * rho.at(n, j) * uu * uu;
      }
    want *= g.cell_weight();
    CHECK(nonseparable_cost(rho, u, g) == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("zero density gives zero") {
    const Field rho = Field::state(g, 0.0);
    const Field u = Field::steps(g, 0.7);
    CHECK(nonseparable_cost(rho, u, g) == 0.0);
  }

  SUBCASE("constant-field quadrature") {
    // 0.02 - 1/2 * 0.2 * 0.64 * 5 = -0.30
    const Field rho = Field::state(g, 0.2);
    const Field u = Field::steps(g, 1.0);
    CHECK(nonseparable_cost(rho, u, g) == doctest::Approx(-0.30).epsilon(1e-12));
  }

  SUBCASE("difference to the equilibrium cost is independent of u") {
    std::mt19937 rng(11);
    const Field rho = random_field(g.nt + 1, g.nx, rng, 0.0, 1.0);
    const Field u1 = random_field(g.nt, g.nx, rng, 0.0, 1.0);
    const Field u2 = random_field(g.nt, g.nx, rng, 0.0, 1.0);
    const double d1 = nonseparable_cost(rho, u1, g) - equilibrium_cost(rho, u1, g);
    const double d2 = nonseparable_cost(rho, u2, g) - equilibrium_cost(rho, u2, g);
    CHECK(d1 == doctest::Approx(d2).epsilon(1e-12));
  }
}

TEST_CASE("flux composite cost") {
  SUBCASE("zero density and constant control give zero") {
    const Grid g = default_grid();
    const Field rho = Field::state(g, 0.0);
    const Field u = Field::steps(g, 0.4);
    Objective obj;
    obj.kind = ObjectiveKind::FluxComposite;
    CHECK(flux_composite_cost(rho, u, g, obj) == 0.0);
  }

  SUBCASE("constant fields with beta_end = 0 reduce to the running term") {
    // rho = 0.3, u = 0.5, L = 1, T = 1: 0.3*(0.125 - 0.5 + 0.6) = 0.0675
    const Grid g = build_grid(1.0, 1.0, 100, 0.5, 1.0);
    const Field rho = Field::state(g, 0.3);
    const Field u = Field::steps(g, 0.5);
    Objective obj;
    obj.kind = ObjectiveKind::FluxComposite;
    obj.beta_end = 0.0;
    CHECK(flux_composite_cost(rho, u, g, obj) == doctest::Approx(0.0675).epsilon(1e-12));
  }

  SUBCASE("partials match finite differences (both flavors)") {
    const Grid g = build_grid(1.0, 0.625, 16, 0.5, 1.0);
    std::mt19937 rng(13);
    for (const ObjectiveKind kind :
         {ObjectiveKind::FluxComposite, ObjectiveKind::FluxCompositeNonseparable,
          ObjectiveKind::Equilibrium, ObjectiveKind::Nonseparable}) {
      Objective obj;
      obj.kind = kind;
      const Field rho = random_field(g.nt + 1, g.nx, rng, 0.1, 0.9);
      const Field u = random_field(g.nt, g.nx, rng, 0.1, 0.9);
      Field dr, du;
      objective_partials(obj, rho, u, g, dr, du);
      const double h = 1e-6;
      std::uniform_int_distribution<int> pick_state(0, (g.nt + 1) * g.nx - 1);
      std::uniform_int_distribution<int> pick_step(0, g.nt * g.nx - 1);
      for (int probe = 0; probe < 6; ++probe) {
        {
          const int idx = pick_state(rng);
          Field rp = rho, rm = rho;
          rp.data()[idx] += h;
          rm.data()[idx] -= h;
          const double fd =
              (objective_value(obj, rp, u, g) - objective_value(obj, rm, u, g)) / (2.0 * h);
          CHECK(grad_err(dr.data()[idx], fd, 1e-9) < 1e-6);
        }
        {
          const int idx = pick_step(rng);
          Field up = u, um = u;
          up.data()[idx] += h;
          um.data()[idx] -= h;
          const double fd =
              (objective_value(obj, rho, up, g) - objective_value(obj, rho, um, g)) / (2.0 * h);
          CHECK(grad_err(du.data()[idx], fd, 1e-9) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("saa_objective") {
  Scenario sc = coarse_scenario();
  const Grid g = make_grid(sc);
  const KLBasis basis = make_basis(sc);
  const Field u = initial_control(sc, g);

  SUBCASE("a single row reduces to that sample's deterministic cost") {
    const ThetaMatrix one = sample_theta(basis, 1, 5);
    const SaaResult r = saa_objective(u, sc, one);
    const Field s = realize_source(basis, one.row(0), sc.mask, g);
    const PdeSolution sol = forward_solve(g, make_rho0(sc, g), u, s);
    CHECK(r.value ==
          doctest::Approx(objective_value(sc.objective, sol.rho, u, g)).epsilon(1e-13));
  }

  SUBCASE("duplicating the sample rows leaves the mean unchanged") {
    const ThetaMatrix base = sample_theta(basis, 4, 5);
    ThetaMatrix doubled;
    doubled.n = 8;
    doubled.d = base.d;
    doubled.v = base.v;
    doubled.v.insert(doubled.v.end(), base.v.begin(), base.v.end());
    const SaaResult a = saa_objective(u, sc, base);
    const SaaResult b = saa_objective(u, sc, doubled);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-13));
  }

  SUBCASE("permutation of sample rows leaves the value unchanged") {
    ThetaMatrix base = sample_theta(basis, 6, 5);
    ThetaMatrix perm = base;
    for (int i = 0; i < base.n; ++i) {
      const int src = (i * 5 + 2) % base.n;  // a fixed permutation
      std::copy(base.row(src).begin(), base.row(src).end(), perm.row(i).begin());
    }
    const SaaResult a = saa_objective(u, sc, base);
    const SaaResult b = saa_objective(u, sc, perm);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-13));
  }

  SUBCASE("gradient matches finite differences at random control entries") {
    const ThetaMatrix samples = sample_theta(basis, 4, 5);
    const SaaResult r = saa_objective(u, sc, samples);
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> pick(0, g.nt * g.nx - 1);
    const double h = 1e-5;
    auto value_at = [&](const Field& uu) {
      double acc = 0.0;
      for (int i = 0; i < samples.n; ++i) {
        const Field s = realize_source(basis, samples.row(i), sc.mask, g);
        const PdeSolution sol = forward_solve(g, make_rho0(sc, g), uu, s);
        acc += objective_value(sc.objective, sol.rho, uu, g);
      }
      return acc / samples.n;
    };
    for (int probe = 0; probe < 10; ++probe) {
      const int idx = pick(rng);
      Field up = u, um = u;
      up.data()[idx] += h;
      um.data()[idx] -= h;
      const double fd = (value_at(up) - value_at(um)) / (2.0 * h);
      CHECK(grad_err(r.grad_u.data()[idx], fd, 1e-9) < 1e-5);
    }
  }
}

#ifndef RARECC_TEST_HELPERS_HPP
#define RARECC_TEST_HELPERS_HPP

#include <cmath>
#include <random>
#include <vector>

#include "rarecc/grid.hpp"
#include "rarecc/scenarios.hpp"

namespace rarecc::test {

// Small scenario for fast end-to-end solver tests.
inline Scenario coarse_scenario() {
  Scenario sc = preset("density_05");
  sc.name = "coarse";
  sc.nx = 20;
  sc.T = 1.5;
  sc.samples.cost = 6;
  sc.samples.risk = 300;
  sc.samples.mc = 2000;
  return sc;
}

inline Field random_field(int rows, int cols, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Field f(rows, cols);
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = dist(rng);
  return f;
}

inline std::vector<double> random_vector(int n, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = dist(rng);
  return v;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-30, std::abs(want));
}

// Relative error with an absolute floor, for gradient comparisons where some
// entries are legitimately ~0.
inline double grad_err(double got, double want, double floor_scale) {
  return std::abs(got - want) / std::max(floor_scale, std::abs(want));
}

}  // namespace rarecc::test

#endif

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rarecc/errors.hpp"
#include "rarecc/form.hpp"
#include "test_helpers.hpp"

using namespace rarecc;

namespace {

// Closed-form MPP of an affine map F = a.theta + b over N(mu, diag(sigma)):
// the Gaussian half-space oracle.
struct AffineOracle {
  std::vector<double> theta_star;
  double beta;
};

AffineOracle affine_mpp(const std::vector<double>& a, double b, const std::vector<double>& mu,
                        const std::vector<double>& sig, double z) {
  const std::size_t d = a.size();
  double aSa = 0.0, amu = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    aSa += a[k] * sig[k] * a[k];
    amu += a[k] * mu[k];
  }
  const double t = (z - b - amu) / aSa;
  AffineOracle out;
  out.theta_star.resize(d);
  for (std::size_t k = 0; k < d; ++k) out.theta_star[k] = mu[k] + t * sig[k] * a[k];
  out.beta = (z - b - amu) / std::sqrt(aSa);
  return out;
}

}  // namespace

TEST_CASE("standard normal cdf and ppf") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std_normal_ppf(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  // frozen high-precision values
  CHECK(std_normal_cdf(-2.0) == doctest::Approx(0.022750131948179207).epsilon(1e-12));
  CHECK(std_normal_ppf(0.995) == doctest::Approx(2.5758293035489008).epsilon(1e-9));
  CHECK(std_normal_ppf(0.998) == doctest::Approx(2.8781617390954834).epsilon(1e-9));
  for (double x : {-3.0, -1.0, 0.5, 2.5}) {
    CHECK(std::abs(std_normal_ppf(std_normal_cdf(x)) - x) < 1e-9);
  }
  CHECK_THROWS_AS(std_normal_ppf(0.0), ConfigError);
  CHECK_THROWS_AS(std_normal_ppf(1.0), ConfigError);
}

TEST_CASE("form probability") {
  const std::vector<double> mu = {0.0};
  const std::vector<double> sig = {1.0};
  SUBCASE("at the mode") {
    const std::vector<double> theta = {0.0};
    CHECK(form_probability(theta, mu, sig) == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("matches the frozen tail value") {
    const std::vector<double> theta = {2.0};
    CHECK(form_probability(theta, mu, sig) ==
          doctest::Approx(0.022750131948179207).epsilon(1e-12));
  }
  SUBCASE("round trip through the beta target") {
    const double alpha = 0.005;
    const double beta_target = std_normal_ppf(1.0 - alpha);
    const std::vector<double> theta = {beta_target};
    CHECK(form_probability(theta, mu, sig) == doctest::Approx(alpha).epsilon(1e-10));
  }
}

TEST_CASE("solve_mpp on injected affine maps") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const MppSettings settings;

  for (int trial = 0; trial < 8; ++trial) {
    const int d = 6;
    AffineThetaMap map;
    map.a.resize(d);
    for (double& v : map.a) v = coef(rng);
    map.b = coef(rng);
    std::vector<double> mu(d), sig(d);
    for (int k = 0; k < d; ++k) {
      mu[k] = coef(rng) * 0.5;
      sig[k] = 0.05 + 0.2 * std::abs(coef(rng));
    }
    // choose z above F(mu) so the constraint is active
    double amu = map.b;
    for (int k = 0; k < d; ++k) amu += map.a[k] * mu[k];
    const double z = amu + 0.5 + std::abs(coef(rng));

    const MppResult got = solve_mpp(map, mu, sig, z, settings);
    const AffineOracle want = affine_mpp(map.a, map.b, mu, sig, z);

    REQUIRE(got.converged);
    CHECK(std::abs(got.beta - want.beta) < 1e-6);
    for (int k = 0; k < d; ++k)
      CHECK(std::abs(got.theta_star[k] - want.theta_star[k]) < 1e-6);
    CHECK(got.kkt_residual <= settings.tol_kkt);
    CHECK(got.feas_residual <= settings.tol_feas * 10);

    // exactness of FORM on the affine map: Phi(-beta) is the half-space mass
    const double p_form = form_probability(got.theta_star, mu, sig);
    const double p_exact = std_normal_cdf(-want.beta);
    CHECK(std::abs(p_form - p_exact) < 1e-6);
  }
}

TEST_CASE("solve_mpp returns the mode when the constraint is inactive") {
  AffineThetaMap map;
  map.a = {1.0, -0.5};
  map.b = 0.0;
  const std::vector<double> mu = {0.3, 0.1};
  const std::vector<double> sig = {0.1, 0.1};
  const double F_mu = map.value(mu);
  const MppResult got = solve_mpp(map, mu, sig, F_mu - 0.3, MppSettings{});
  CHECK(got.converged);
  CHECK(got.lambda == 0.0);
  CHECK(got.beta == 0.0);
  CHECK(got.theta_star == mu);
}

TEST_CASE("solve_mpp stationarity: gradient directions are collinear") {
  AffineThetaMap map;
  map.a = {0.8, -0.3, 0.5};
  map.b = 0.1;
  const std::vector<double> mu = {-0.5, -0.5, -0.5};
  const std::vector<double> sig = {0.1, 0.1, 0.1};
  const MppResult got = solve_mpp(map, mu, sig, 0.7, MppSettings{});
  REQUIRE(got.converged);
  // angle between Sigma^{-1}(theta - mu) and grad F below 1e-4 rad
  std::vector<double> lhs(3), grad(3);
  map.value_grad(got.theta_star, grad);
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    lhs[k] = (got.theta_star[k] - mu[k]) / sig[k];
    dot += lhs[k] * grad[k];
    n1 += lhs[k] * lhs[k];
    n2 += grad[k] * grad[k];
  }
  const double cosang = dot / std::sqrt(n1 * n2);
  CHECK(std::acos(std::min(1.0, cosang)) < 1e-4);
  CHECK(got.lambda >= 0.0);
}

TEST_CASE("beta is monotone nondecreasing in z") {
  AffineThetaMap map;
  map.a = {0.9, 0.2, -0.4, 0.6};
  map.b = 0.0;
  const std::vector<double> mu(4, -0.5);
  const std::vector<double> sig(4, 0.1);
  double prev = -1.0;
  const double F_mu = map.value(mu);
  for (double z = F_mu + 0.1; z < F_mu + 1.2; z += 0.2) {
    const MppResult got = solve_mpp(map, mu, sig, z, MppSettings{});
    REQUIRE(got.converged);
    CHECK(got.beta >= prev - 1e-9);
    prev = got.beta;
  }
}

TEST_CASE("solve_mpp is insensitive to the warm start") {
  AffineThetaMap map;
  map.a = {0.7, -0.6};
  map.b = 0.2;
  const std::vector<double> mu = {-0.5, -0.5};
  const std::vector<double> sig = {0.1, 0.1};
  const double z = map.value(mu) + 0.8;
  const MppResult cold = solve_mpp(map, mu, sig, z, MppSettings{});
  const std::vector<double> elsewhere = {1.0, 2.0};
  const MppResult warm = solve_mpp(map, mu, sig, z, MppSettings{}, &elsewhere);
  REQUIRE(cold.converged);
  REQUIRE(warm.converged);
  for (int k = 0; k < 2; ++k)
    CHECK(std::abs(cold.theta_star[k] - warm.theta_star[k]) < 1e-5);
  CHECK(std::abs(cold.beta - warm.beta) < 1e-6);
}

#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "rarecc/errors.hpp"
#include "rarecc/randfield.hpp"

using namespace rarecc;

namespace {

// Nystrom oracle: eigenvalues of the midpoint-discretized kernel operator.
std::vector<double> nystrom_eigenvalues(double sigma2, double l_c, double L, int npts, int d) {
  const double h = L / npts;
  Eigen::MatrixXd K(npts, npts);
  for (int i = 0; i < npts; ++i) {
    const double xi = (i + 0.5) * h;
    for (int j = 0; j < npts; ++j) {
      const double xj = (j + 0.5) * h;
      K(i, j) = sigma2 * std::exp(-std::abs(xi - xj) / l_c) * h;
    }
  }
  // symmetrize against roundoff before the self-adjoint solve
  Eigen::MatrixXd Ks = 0.5 * (K + K.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ks);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + npts);
  std::sort(ev.rbegin(), ev.rend());
  ev.resize(static_cast<std::size_t>(d));
  return ev;
}

}  // namespace

TEST_CASE("KL eigenvalues decrease and respect the kernel trace bound") {
  for (double lc : {0.2, 0.5, 1.5}) {
    const KLBasis b = kl_basis(1.0, lc, 1.0, 10);
    double trace = 0.0;
    for (int k = 0; k + 1 < b.d; ++k) CHECK(b.lambdas[k] > b.lambdas[k + 1]);
    for (double l : b.lambdas) {
      CHECK(l > 0.0);
      trace += l;
    }
    CHECK(trace <= 1.0 * 1.0 + 1e-12);
  }
}

TEST_CASE("KL eigenvalues match the Nystrom oracle within 1%") {
  const KLBasis b = kl_basis(1.0, 0.5, 1.0, 10);
  const std::vector<double> oracle = nystrom_eigenvalues(1.0, 0.5, 1.0, 2000, 10);
  for (int k = 0; k < 10; ++k) {
    CHECK(std::abs(b.lambdas[k] - oracle[k]) / oracle[k] < 0.01);
  }
}

TEST_CASE("eigenfunctions are orthonormal under fine quadrature") {
  const KLBasis b = kl_basis(1.0, 0.5, 1.0, 8);
  const int npts = 20000;
  const double h = b.L / npts;
  for (int i = 0; i < b.d; ++i)
    for (int j = i; j < b.d; ++j) {
      double acc = 0.0;
      for (int q = 0; q < npts; ++q) {
        const double x = (q + 0.5) * h;
        acc += b.eigenfunction(i, x) * b.eigenfunction(j, x) * h;
      }
      const double want = i == j ? 1.0 : 0.0;
      CHECK(std::abs(acc - want) < 1e-6);
    }
}

TEST_CASE("truncated covariance reconstruction at (0.25, 0.75) within 5%") {
  const KLBasis b = kl_basis(1.0, 0.5, 1.0, 10);
  double rec = 0.0;
  for (int k = 0; k < b.d; ++k)
    rec += b.lambdas[k] * b.eigenfunction(k, 0.25) * b.eigenfunction(k, 0.75);
  const double exact = std::exp(-std::abs(0.25 - 0.75) / 0.5);
  CHECK(std::abs(rec - exact) / exact < 0.05);
}

TEST_CASE("retained variance is nondecreasing in the truncation order") {
  double prev = 0.0;
  for (int d = 1; d <= 12; ++d) {
    const KLBasis b = kl_basis(1.0, 0.5, 1.0, d);
    double sum = 0.0;
    for (double l : b.lambdas) sum += l;
    CHECK(sum >= prev - 1e-14);
    prev = sum;
  }
}

TEST_CASE("sample_theta") {
  SUBCASE("zero variance collapses every row onto the mean") {
    const KLBasis b = kl_basis(1.0, 0.5, 1.0, 5, 0.1, -0.5, 0.0);
    const ThetaMatrix m = sample_theta(b, 17, 42);
    for (int i = 0; i < m.n; ++i)
      for (double v : m.row(i)) CHECK(v == -0.5);
  }

  SUBCASE("law of large numbers at n = 1e5") {
    const KLBasis b = kl_basis(1.0, 0.5, 1.0, 10);
    const int n = 100000;
    const ThetaMatrix m = sample_theta(b, n, 7);
    for (int k = 0; k < b.d; ++k) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += m.v[static_cast<std::size_t>(i) * b.d + k];
      mean /= n;
      CHECK(std::abs(mean - (-0.5)) < 0.01);
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double dv = m.v[static_cast<std::size_t>(i) * b.d + k] - mean;
        var += dv * dv;
      }
      var /= (n - 1);
      CHECK(std::abs(var - 0.1) / 0.1 < 0.05);
    }
  }

  SUBCASE("same seed gives bit-identical matrices") {
    const KLBasis b = kl_basis(1.0, 0.5, 1.0, 10);
    const ThetaMatrix a = sample_theta(b, 300, 99);
    const ThetaMatrix c = sample_theta(b, 300, 99);
    CHECK(a.v == c.v);
  }

  SUBCASE("row i does not depend on n") {
    const KLBasis b = kl_basis(1.0, 0.5, 1.0, 10);
    const ThetaMatrix small = sample_theta(b, 10, 123);
    const ThetaMatrix big = sample_theta(b, 500, 123);
    for (int i = 0; i < 10; ++i)
      for (int k = 0; k < b.d; ++k)
        CHECK(small.v[static_cast<std::size_t>(i) * b.d + k] ==
              big.v[static_cast<std::size_t>(i) * b.d + k]);
  }
}

TEST_CASE("realize_source") {
  const Grid g = build_grid(1.0, 1.0, 20, 0.5, 1.0);
  const KLBasis b = kl_basis(1.0, 0.5, 1.0, 6);

  SUBCASE("dead mask gives the zero field") {
    const Mask dead{0.0, 0.01, 0.5, 1.0, true};  // below the first cell center
    std::vector<double> theta(6, -0.5);
    const Field s = realize_source(b, theta, dead, g);
    for (double v : s.values()) CHECK(v == 0.0);
  }

  SUBCASE("theta -> -inf limit leaves mu_s inside the mask and 0 outside") {
    const Mask mask{0.4, 0.6, 1.0, 1.0, true};
    std::vector<double> theta(6, -745.0);  // exp underflows to zero
    const Field s = realize_source(b, theta, mask, g);
    for (int n = 0; n < g.nt; ++n)
      for (int j = 0; j < g.nx; ++j) {
        const double x = g.x_center(j);
        const double want = (x >= 0.4 && x <= 0.6) ? b.mu_s : 0.0;
        CHECK(s.at(n, j) == doctest::Approx(want).epsilon(1e-14));
      }
  }

  SUBCASE("hand evaluation of the expansion at three grid points") {
    const Mask mask{0.0, 1.0, 1.0, 1.0, true};
    const std::vector<double> theta = {-0.3, -0.9, 0.1, -0.5, -0.2, -0.6};
    const Field s = realize_source(b, theta, mask, g);
    for (int j : {2, 9, 17}) {
      const double x = g.x_center(j);
      double want = b.mu_s;
      for (int k = 0; k < b.d; ++k)
        want += std::sqrt(b.lambdas[k]) * b.eigenfunction(k, x) *
                std::exp(theta[static_cast<std::size_t>(k)]);
      CHECK(s.at(0, j) == doctest::Approx(want).epsilon(1e-13));
    }
  }

  SUBCASE("periodic mask repeats over the horizon") {
    const Mask mask{0.0, 1.0, 0.25, 0.5, true};
    std::vector<double> theta(6, -0.5);
    const Field s = realize_source(b, theta, mask, g);
    for (int n = 0; n < g.nt; ++n) {
      const double t = g.t_node(n);
      const double phase = t - 0.5 * std::floor(t / 0.5);
      const bool active = phase < 0.25;
      CHECK((s.at(n, 0) != 0.0) == active);
    }
  }
}

TEST_CASE("mask validation") {
  CHECK_THROWS_AS(validate_mask(Mask{0.6, 0.4, 0.5, 1.0, true}, 1.0), ConfigError);
  CHECK_THROWS_AS(validate_mask(Mask{0.0, 0.5, 2.0, 1.0, true}, 1.0), ConfigError);
  CHECK_THROWS_AS(validate_mask(Mask{0.0, 1.5, 0.5, 1.0, true}, 1.0), ConfigError);
  CHECK_NOTHROW(validate_mask(Mask{0.4, 0.6, 2.0, 0.0, false}, 1.0));
}

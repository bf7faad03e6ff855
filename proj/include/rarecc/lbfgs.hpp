#ifndef RARECC_LBFGS_HPP
#define RARECC_LBFGS_HPP

#include <functional>
#include <span>
#include <vector>

namespace rarecc {

// Objective contract: fill grad (same length as x) and return the value.
using FunGrad = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsSettings {
  int max_iter = 300;
  double tol_grad = 1e-5;   // max-norm of the preconditioned projected gradient
  int memory = 10;
  double c1 = 1e-4;         // Armijo slope fraction
  int max_backtracks = 50;
  int max_evals = 0;        // 0 = unlimited
};

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double pg_norm = 0.0;
  int iterations = 0;
  int n_evals = 0;
  bool converged = false;
  bool line_search_failed = false;
};

// Projected L-BFGS with Armijo backtracking over box bounds. Empty bound
// vectors mean unconstrained; individual entries may be +-infinity. The
// optional diagonal `precond` seeds the initial inverse Hessian and sets the
// metric for the convergence test (pass the natural squared step scale of
// each variable; defaults to ones).
LbfgsResult lbfgs_box(const FunGrad& fg, std::vector<double> x0, const std::vector<double>& lo,
                      const std::vector<double>& hi, const LbfgsSettings& settings,
                      const std::vector<double>& precond = {},
                      const std::function<void(int, double)>& on_accept = nullptr);

}  // namespace rarecc

#endif  // RARECC_LBFGS_HPP

#ifndef RARECC_FORM_HPP
#define RARECC_FORM_HPP

#include <span>
#include <vector>

#include "rarecc/grid.hpp"
#include "rarecc/randfield.hpp"
#include "rarecc/risk.hpp"

namespace rarecc {

// Standard normal CDF (erf-based) and its inverse (rational approximation
// plus one Halley refinement on the CDF).
double std_normal_cdf(double x);
double std_normal_ppf(double p);

// Mahalanobis distance ||theta - mu|| in the diagonal Sigma^{-1} metric.
double beta_index(std::span<const double> theta, std::span<const double> mu,
                  std::span<const double> sigma_diag);

// First-order rare-event probability Phi(-beta).
double form_probability(std::span<const double> theta, std::span<const double> mu,
                        std::span<const double> sigma_diag);

// Differentiable scalar map of the uncertainty vector.
class ThetaMap {
 public:
  virtual ~ThetaMap() = default;
  virtual int dim() const = 0;
  virtual double value(std::span<const double> theta) const = 0;
  // Fills grad (dim entries) and returns the value.
  virtual double value_grad(std::span<const double> theta, std::span<double> grad) const = 0;
};

struct AffineThetaMap final : ThetaMap {
  std::vector<double> a;
  double b = 0.0;

  int dim() const override { return static_cast<int>(a.size()); }
  double value(std::span<const double> theta) const override;
  double value_grad(std::span<const double> theta, std::span<double> grad) const override;
};

struct MppSettings {
  double tol_kkt = 1e-6;
  double tol_feas = 1e-8;
  int max_outer = 60;
  int max_inner = 400;
  int lbfgs_memory = 10;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  double penalty_cap = 1e12;
};

struct MppResult {
  std::vector<double> theta_star;
  double lambda = 0.0;
  double beta = 0.0;
  double F_at_star = 0.0;
  double kkt_residual = 0.0;   // max-norm of Sigma^{-1}(theta-mu) - lambda grad F
  double feas_residual = 0.0;  // |F - z| when the constraint is active
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
};

// Most probable point of {F >= z} under N(mu, diag(sigma_diag)): minimum
// Mahalanobis norm subject to the single inequality, solved by an augmented
// Lagrangian with L-BFGS inner solves. If F(mu) >= z the constraint is
// inactive at the mode and (mu, lambda = 0) is returned directly.
MppResult solve_mpp(const ThetaMap& F, std::span<const double> mu,
                    std::span<const double> sigma_diag, double z, const MppSettings& settings,
                    const std::vector<double>* warm_start = nullptr);

// ---------------------------------------------------------------------------
// PDE-backed extreme-event map for a fixed control field.
// ---------------------------------------------------------------------------

struct EventContext {
  const Grid* grid = nullptr;
  const std::vector<double>* rho0 = nullptr;
  const KLBasis* basis = nullptr;
  const Mask* mask = nullptr;
  SmoothEvent event;
};

double event_value(const EventContext& ctx, const Field& u, std::span<const double> theta);
// Adjoint gradient with respect to theta only.
double event_value_grad_theta(const EventContext& ctx, const Field& u,
                              std::span<const double> theta, std::vector<double>& g_theta);
// Gradients with respect to both theta and the control.
double event_value_grads(const EventContext& ctx, const Field& u, std::span<const double> theta,
                         std::vector<double>& g_theta, Field& g_u);
// Unsmoothed maximum of the measure field (the Monte Carlo event).
double event_true_max(const EventContext& ctx, const Field& u, std::span<const double> theta);

class PdeEventMap final : public ThetaMap {
 public:
  PdeEventMap(const EventContext& ctx, const Field& u) : ctx_(ctx), u_(u) {}

  int dim() const override { return ctx_.basis->d; }
  double value(std::span<const double> theta) const override {
    return event_value(ctx_, u_, theta);
  }
  double value_grad(std::span<const double> theta, std::span<double> grad) const override;

 private:
  const EventContext& ctx_;
  const Field& u_;
};

}  // namespace rarecc

#endif  // RARECC_FORM_HPP

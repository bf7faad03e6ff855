#ifndef RARECC_MC_HPP
#define RARECC_MC_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rarecc/grid.hpp"
#include "rarecc/randfield.hpp"
#include "rarecc/scenarios.hpp"

namespace rarecc {

struct ViolationEstimate {
  double p_hat = 0.0;
  long n_samples = 0;
  long n_violations = 0;
  double ci_half_width = 0.0;  // 1.96 sqrt(p(1-p)/n)
  uint64_t seed = 0;
  // diagnostic: true max minus smooth max at theta = mu_theta
  double smooth_true_gap = 0.0;
};

// Empirical P(max-cell M(rho_i, u) >= z) over i.i.d. theta samples. Events
// are counted with the true (unsmoothed) maximum; theta_i depends only on
// (seed, i), so partial and parallel runs agree.
ViolationEstimate estimate_violation(const Field& u, const Scenario& sc, double z,
                                     long n_samples, uint64_t seed);

// Raw per-sample true maxima, for histogram/KDE export.
std::vector<double> max_measure_distribution(const Field& u, const Scenario& sc, long n_samples,
                                             uint64_t seed);

// Core with an injectable event map (test oracle hook): theta rows are drawn
// from the basis law exactly as estimate_violation draws them.
ViolationEstimate estimate_violation_map(
    const std::function<double(std::span<const double>)>& event_map, const KLBasis& basis,
    double z, long n_samples, uint64_t seed);

// Diagnostic: unsmoothed minus smoothed extreme-event value at theta =
// mu_theta (bounded by gamma * log of the cell count).
double smooth_true_gap(const Field& u, const Scenario& sc);

}  // namespace rarecc

#endif  // RARECC_MC_HPP

#ifndef RARECC_SCENARIOS_HPP
#define RARECC_SCENARIOS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "rarecc/cost.hpp"
#include "rarecc/grid.hpp"
#include "rarecc/randfield.hpp"
#include "rarecc/risk.hpp"

namespace rarecc {

struct Rho0Spec {
  enum class Kind { Uniform, GaussianBump };
  Kind kind = Kind::Uniform;
  double value = 0.2;       // Uniform
  double base = 0.06;       // GaussianBump: base + amplitude*exp(-(x-center)^2/(2 width^2))
  double amplitude = 0.54;
  double center = 0.5;
  double width = 0.1;

  double eval(double x) const;

  bool operator==(const Rho0Spec&) const = default;
};

struct SampleSizes {
  int cost = 100;     // SAA samples for the expected cost
  int risk = 5000;    // CVaR risk-term samples
  long mc = 100000;   // validation Monte Carlo samples

  bool operator==(const SampleSizes&) const = default;
};

// Full experiment configuration. All values default to the canonical
// experiment constants; presets only change what differs between cases.
struct Scenario {
  std::string name = "custom";

  // grid
  double L = 1.0;
  double T = 5.0;
  int nx = 100;
  double cfl = 0.5;
  double u_max = 1.0;

  Rho0Spec rho0;
  Mask mask;

  // source random field
  double kl_sigma2 = 1.0;
  double kl_lc = 0.5;
  int kl_d = 10;
  double mu_s = 0.1;
  double mu_theta = -0.5;
  double sigma_theta = 0.1;

  RiskMeasure risk;
  Objective objective;

  double z = 0.65;       // safety threshold
  double alpha = 0.005;  // target violation probability

  double gamma = 0.01;    // smooth max temperature
  double epsilon = 0.01;  // smooth positive-part width
  double eta = 0.01;      // CVaR risk-aversion weight

  SampleSizes samples;
  uint64_t seed = 1;

  bool operator==(const Scenario&) const = default;
};

// Canonical experiments: density_05, density_02, cvs, flux.
Scenario preset(const std::string& name);
std::vector<std::string> preset_names();

// Greenshields equilibrium speed, clamped to [0, 1].
double greenshields(double rho);

void validate_scenario(const Scenario& sc);

Grid make_grid(const Scenario& sc);
std::vector<double> make_rho0(const Scenario& sc, const Grid& grid);
KLBasis make_basis(const Scenario& sc);
// u0 = U(rho0(x)) broadcast over time, clamped to the control box.
Field initial_control(const Scenario& sc, const Grid& grid);

// JSON round trip (bit-identical: serialize -> parse -> equal).
std::string scenario_to_json(const Scenario& sc);
Scenario scenario_from_json(const std::string& text);
// Hash of the canonical serialization, for run provenance.
std::string scenario_digest(const Scenario& sc);

}  // namespace rarecc

#endif  // RARECC_SCENARIOS_HPP

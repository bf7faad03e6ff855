#include "rarecc/scenarios.hpp"

#include <cmath>

#include <json.hpp>

#include "rarecc/errors.hpp"
#include "rarecc/util.hpp"

namespace rarecc {

using nlohmann::json;

double Rho0Spec::eval(double x) const {
  switch (kind) {
    case Kind::Uniform: return value;
    case Kind::GaussianBump: {
      const double dxc = x - center;
      return base + amplitude * std::exp(-0.5 * dxc * dxc / (width * width));
    }
  }
  return 0.0;
}

double greenshields(double rho) {
  const double u = 1.0 - rho;
  return u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
}

Scenario preset(const std::string& name) {
  Scenario sc;
  sc.name = name;
  if (name == "density_05" || name == "density_02") {
    sc.rho0 = {Rho0Spec::Kind::GaussianBump, 0.2, 0.06, 0.54, 0.5, 0.1};
    sc.mask = {0.4, 0.6, 0.5, 1.0, true};
    sc.risk.kind = RiskKind::MaxDensity;
    sc.objective.kind = ObjectiveKind::Equilibrium;
    sc.z = 0.65;
    sc.alpha = (name == "density_05") ? 0.005 : 0.002;
    sc.eta = 0.01;
  } else if (name == "cvs") {
    sc.rho0 = {Rho0Spec::Kind::Uniform, 0.2, 0.06, 0.54, 0.5, 0.1};
    sc.mask = {0.4, 0.6, 2.0, 0.0, false};
    sc.risk.kind = RiskKind::MaxCVS;
    sc.risk.window_cells = 5;
    sc.objective.kind = ObjectiveKind::Equilibrium;
    sc.z = 0.063;
    sc.alpha = 0.005;
    sc.eta = 0.0248;
  } else if (name == "flux") {
    sc.rho0 = {Rho0Spec::Kind::Uniform, 0.3, 0.06, 0.54, 0.5, 0.1};
    sc.mask = {0.4, 0.6, 2.0, 0.0, false};
    sc.risk.kind = RiskKind::MaxFlux;
    sc.objective.kind = ObjectiveKind::FluxComposite;
    sc.objective.beta_t = 0.005;
    sc.objective.beta_x = 0.005;
    sc.objective.beta_end = 0.1;
    sc.z = 0.3;
    sc.alpha = 0.005;
    sc.eta = 2.2;
  } else {
    std::string valid;
    for (const auto& p : preset_names()) valid += (valid.empty() ? "" : ", ") + p;
    throw ConfigError("unknown preset '" + name + "' (valid: " + valid + ")");
  }
  validate_scenario(sc);
  return sc;
}

std::vector<std::string> preset_names() { return {"density_05", "density_02", "cvs", "flux"}; }

void validate_scenario(const Scenario& sc) {
  // grid parameters are checked again by build_grid
  if (!(sc.L > 0.0 && sc.T > 0.0 && sc.nx >= 4))
    throw ConfigError("scenario: invalid grid extents");
  validate_mask(sc.mask, sc.L);
  if (!(sc.z > 0.0)) throw ConfigError("scenario: z must be positive");
  if (!(sc.alpha > 0.0 && sc.alpha < 0.5))
    throw ConfigError("scenario: alpha must lie in (0, 0.5)");
  if (!(sc.gamma > 0.0 && sc.epsilon > 0.0))
    throw ConfigError("scenario: smoothing parameters must be positive");
  if (!(sc.eta > 0.0)) throw ConfigError("scenario: eta must be positive");
  if (sc.kl_d < 1) throw ConfigError("scenario: kl_d must be >= 1");
  if (!(sc.kl_sigma2 > 0.0 && sc.kl_lc > 0.0))
    throw ConfigError("scenario: KL kernel parameters must be positive");
  if (sc.samples.cost < 1 || sc.samples.risk < 1 || sc.samples.mc < 100)
    throw ConfigError("scenario: sample sizes too small (mc needs >= 100)");
  if (sc.risk.kind == RiskKind::MaxCVS && sc.risk.window_cells >= sc.nx)
    throw ConfigError("scenario: CVS window must be smaller than nx");

  // rho0 within [0, 1] at the cell centers
  const Grid g = build_grid(sc.L, sc.T, sc.nx, sc.cfl, sc.u_max);
  for (int j = 0; j < g.nx; ++j) {
    const double r = sc.rho0.eval(g.x_center(j));
    if (!(r >= 0.0 && r <= 1.0))
      throw ConfigError("scenario: rho0 leaves [0, 1] at x=" + std::to_string(g.x_center(j)));
  }
}

Grid make_grid(const Scenario& sc) { return build_grid(sc.L, sc.T, sc.nx, sc.cfl, sc.u_max); }

std::vector<double> make_rho0(const Scenario& sc, const Grid& grid) {
  std::vector<double> r(static_cast<std::size_t>(grid.nx));
  for (int j = 0; j < grid.nx; ++j) r[static_cast<std::size_t>(j)] = sc.rho0.eval(grid.x_center(j));
  return r;
}

KLBasis make_basis(const Scenario& sc) {
  return kl_basis(sc.kl_sigma2, sc.kl_lc, sc.L, sc.kl_d, sc.mu_s, sc.mu_theta, sc.sigma_theta);
}

Field initial_control(const Scenario& sc, const Grid& grid) {
  Field u = Field::steps(grid);
  std::vector<double> row(static_cast<std::size_t>(grid.nx));
  for (int j = 0; j < grid.nx; ++j)
    row[static_cast<std::size_t>(j)] = greenshields(sc.rho0.eval(grid.x_center(j)));
  for (int n = 0; n < grid.nt; ++n) {
    double* un = u.row(n);
    for (int j = 0; j < grid.nx; ++j) un[j] = row[static_cast<std::size_t>(j)];
  }
  return u;
}

namespace {

json rho0_to_json(const Rho0Spec& r) {
  if (r.kind == Rho0Spec::Kind::Uniform) return json{{"type", "uniform"}, {"value", r.value}};
  return json{{"type", "gaussian_bump"},
              {"base", r.base},
              {"amplitude", r.amplitude},
              {"center", r.center},
              {"width", r.width}};
}

Rho0Spec rho0_from_json(const json& j, const Rho0Spec& defaults) {
  Rho0Spec r = defaults;
  const std::string type = j.value("type", r.kind == Rho0Spec::Kind::Uniform
                                               ? std::string("uniform")
                                               : std::string("gaussian_bump"));
  if (type == "uniform") {
    r.kind = Rho0Spec::Kind::Uniform;
    r.value = j.value("value", r.value);
  } else if (type == "gaussian_bump") {
    r.kind = Rho0Spec::Kind::GaussianBump;
    r.base = j.value("base", r.base);
    r.amplitude = j.value("amplitude", r.amplitude);
    r.center = j.value("center", r.center);
    r.width = j.value("width", r.width);
  } else {
    throw ConfigError("rho0: unknown type '" + type + "'");
  }
  return r;
}

}  // namespace

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["grid"] = {{"L", sc.L}, {"T", sc.T}, {"nx", sc.nx}, {"cfl", sc.cfl}, {"u_max", sc.u_max}};
  j["rho0"] = rho0_to_json(sc.rho0);
  j["mask"] = {{"x_lo", sc.mask.x_lo},
               {"x_hi", sc.mask.x_hi},
               {"t_on", sc.mask.t_on},
               {"t_period", sc.mask.t_period},
               {"periodic", sc.mask.periodic}};
  j["kl"] = {{"sigma2", sc.kl_sigma2}, {"l_c", sc.kl_lc},           {"d", sc.kl_d},
             {"mu_s", sc.mu_s},        {"mu_theta", sc.mu_theta},   {"sigma_theta", sc.sigma_theta}};
  j["risk"] = {{"kind", risk_kind_name(sc.risk.kind)},
               {"window_cells", sc.risk.window_cells},
               {"floor", sc.risk.floor}};
  j["objective"] = {{"kind", objective_kind_name(sc.objective.kind)},
                    {"beta_t", sc.objective.beta_t},
                    {"beta_x", sc.objective.beta_x},
                    {"beta_end", sc.objective.beta_end}};
  j["z"] = sc.z;
  j["alpha"] = sc.alpha;
  j["gamma"] = sc.gamma;
  j["epsilon"] = sc.epsilon;
  j["eta"] = sc.eta;
  j["samples"] = {{"cost", sc.samples.cost}, {"risk", sc.samples.risk}, {"mc", sc.samples.mc}};
  j["seed"] = sc.seed;
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  Scenario sc;
  if (j.contains("preset")) sc = preset(j.at("preset").get<std::string>());
  sc.name = j.value("name", sc.name);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    sc.L = g.value("L", sc.L);
    sc.T = g.value("T", sc.T);
    sc.nx = g.value("nx", sc.nx);
    sc.cfl = g.value("cfl", sc.cfl);
    sc.u_max = g.value("u_max", sc.u_max);
  }
  if (j.contains("rho0")) sc.rho0 = rho0_from_json(j["rho0"], sc.rho0);
  if (j.contains("mask")) {
    const json& m = j["mask"];
    sc.mask.x_lo = m.value("x_lo", sc.mask.x_lo);
    sc.mask.x_hi = m.value("x_hi", sc.mask.x_hi);
    sc.mask.t_on = m.value("t_on", sc.mask.t_on);
    sc.mask.t_period = m.value("t_period", sc.mask.t_period);
    sc.mask.periodic = m.value("periodic", sc.mask.periodic);
  }
  if (j.contains("kl")) {
    const json& k = j["kl"];
    sc.kl_sigma2 = k.value("sigma2", sc.kl_sigma2);
    sc.kl_lc = k.value("l_c", sc.kl_lc);
    sc.kl_d = k.value("d", sc.kl_d);
    sc.mu_s = k.value("mu_s", sc.mu_s);
    sc.mu_theta = k.value("mu_theta", sc.mu_theta);
    sc.sigma_theta = k.value("sigma_theta", sc.sigma_theta);
  }
  if (j.contains("risk")) {
    const json& r = j["risk"];
    if (r.contains("kind")) sc.risk.kind = risk_kind_from_name(r["kind"].get<std::string>());
    sc.risk.window_cells = r.value("window_cells", sc.risk.window_cells);
    sc.risk.floor = r.value("floor", sc.risk.floor);
  }
  if (j.contains("objective")) {
    const json& o = j["objective"];
    if (o.contains("kind"))
      sc.objective.kind = objective_kind_from_name(o["kind"].get<std::string>());
    sc.objective.beta_t = o.value("beta_t", sc.objective.beta_t);
    sc.objective.beta_x = o.value("beta_x", sc.objective.beta_x);
    sc.objective.beta_end = o.value("beta_end", sc.objective.beta_end);
  }
  sc.z = j.value("z", sc.z);
  sc.alpha = j.value("alpha", sc.alpha);
  sc.gamma = j.value("gamma", sc.gamma);
  sc.epsilon = j.value("epsilon", sc.epsilon);
  sc.eta = j.value("eta", sc.eta);
  if (j.contains("samples")) {
    const json& s = j["samples"];
    sc.samples.cost = s.value("cost", sc.samples.cost);
    sc.samples.risk = s.value("risk", sc.samples.risk);
    sc.samples.mc = s.value("mc", sc.samples.mc);
  }
  sc.seed = j.value("seed", sc.seed);
  validate_scenario(sc);
  return sc;
}

std::string scenario_digest(const Scenario& sc) { return fnv1a_hex(scenario_to_json(sc)); }

}  // namespace rarecc

#include "pinc/physics.hpp"

namespace pinc {

void NormalizationRefs::validate() const {
  if (!(t_ref > 0 && x_ref > 0 && P_ref > 0 && V_ref > 0 && rho_ref > 0)) {
    throw ConfigError("normalization references must be strictly positive");
  }
}

}  // namespace pinc

namespace pinc::physics {

std::string to_string(Fluid f) {
  return f == Fluid::incompressible ? "incompressible" : "ideal_gas";
}

std::string to_string(FrictionModel f) {
  switch (f) {
    case FrictionModel::laminar: return "laminar";
    case FrictionModel::blasius: return "blasius";
    case FrictionModel::swamee_jain: return "swamee_jain";
    case FrictionModel::colebrook: return "colebrook";
  }
  return "blasius";
}

std::string to_string(Regime r) { return r == Regime::steady ? "steady" : "transient"; }

Fluid fluid_from_string(const std::string& s) {
  if (s == "incompressible") return Fluid::incompressible;
  if (s == "ideal_gas") return Fluid::ideal_gas;
  throw ConfigError("unknown fluid '" + s + "'");
}

FrictionModel friction_from_string(const std::string& s) {
  if (s == "laminar") return FrictionModel::laminar;
  if (s == "blasius") return FrictionModel::blasius;
  if (s == "swamee_jain") return FrictionModel::swamee_jain;
  if (s == "colebrook") return FrictionModel::colebrook;
  throw ConfigError("unknown friction model '" + s + "'");
}

Regime regime_from_string(const std::string& s) {
  if (s == "steady") return Regime::steady;
  if (s == "transient") return Regime::transient;
  throw ConfigError("unknown regime '" + s + "'");
}

void FluidSystem::validate() const {
  if (!(D > 0 && L > 0 && mu > 0 && P_reservoir > 0 && eps >= 0)) {
    throw ConfigError("fluid system requires D, L, mu, P_reservoir > 0 and eps >= 0");
  }
  if (!(re_min > 0 && re_max > re_min)) throw ConfigError("Reynolds clamp must satisfy 0 < min < max");
  if (fluid == Fluid::incompressible && !(rho > 0 && k > 0)) {
    throw ConfigError("incompressible system requires rho > 0 and k > 0");
  }
  if (fluid == Fluid::ideal_gas && !(M > 0 && R > 0 && T > 0 && PI > 0)) {
    throw ConfigError("ideal gas system requires M, R, T, PI > 0");
  }
}

FluidSystem table1_system() {
  FluidSystem s;
  s.fluid = Fluid::incompressible;
  s.D = 0.1;
  s.mu = 0.001;
  s.k = 1e-5;
  s.P_reservoir = 2e5;
  s.L = 100.0;
  s.theta = 0.0;
  s.rho = 1000.0;
  s.friction = FrictionModel::blasius;
  return s;
}

NormalizationRefs table1_refs() {
  // rho_ref is unused by the liquid residuals; the liquid density keeps it meaningful.
  return NormalizationRefs{10.0, 100.0, 1e5, 1.0, 1000.0};
}

FluidSystem table2_system() {
  FluidSystem s;
  s.fluid = Fluid::ideal_gas;
  s.D = 0.2;
  s.mu = 5e-5;
  s.PI = 5e-4;
  s.P_reservoir = 5e6;
  s.L = 2000.0;
  s.theta = 0.0;
  s.M = 0.03;
  s.R = 8.314;
  s.T = 300.0;
  s.eps = 0.0;
  s.friction = FrictionModel::swamee_jain;
  return s;
}

NormalizationRefs table2_refs() { return NormalizationRefs{100.0, 2000.0, 5e6, 50.0, 60.0}; }

double eos_density(double P, const FluidSystem& sys) {
  if (sys.fluid == Fluid::incompressible) return sys.rho;
  if (!(P > 0)) throw NumericalError("ideal gas density needs positive pressure");
  return P * sys.M / (sys.R * sys.T);
}

namespace {

LocalFields<double> fields_at(const net::NetworkModel& model, std::span<const double> input,
                              bool with_time) {
  const net::EvalResult e = net::eval_with_input_derivatives(model.arch, model.params, input);
  LocalFields<double> y;
  y.P = e.output[0];
  y.V = e.output[1];
  y.dP_dx = e.input_jacobian(0, 0);
  y.dV_dx = e.input_jacobian(1, 0);
  if (with_time) {
    y.dP_dt = e.input_jacobian(0, 1);
    y.dV_dt = e.input_jacobian(1, 1);
  }
  return y;
}

void require_fluid(const FluidSystem& sys, Fluid f) {
  if (sys.fluid != f) throw ConfigError("residual form does not match the fluid of the system");
}

void require_input(const net::NetworkModel& model, int dim) {
  if (model.arch.input_dim != dim) {
    throw DimensionError("network input_dim " + std::to_string(model.arch.input_dim) +
                         " does not fit this residual (expected " + std::to_string(dim) + ")");
  }
}

ResidualVector pack(const std::array<double, 2>& r) { return {r[0], r[1]}; }

}  // namespace

ResidualVector residual_inc_steady(const net::NetworkModel& model, const FluidSystem& sys,
                                   double x, double u) {
  require_fluid(sys, Fluid::incompressible);
  require_input(model, 2);
  const double in[2] = {x, u};
  return pack(pde_residual(sys, model.norm, Regime::steady, fields_at(model, in, false)));
}

ResidualVector residual_inc_transient(const net::NetworkModel& model, const FluidSystem& sys,
                                      double x, double t, double u0, double u) {
  require_fluid(sys, Fluid::incompressible);
  require_input(model, 4);
  const double in[4] = {x, t, u0, u};
  return pack(pde_residual(sys, model.norm, Regime::transient, fields_at(model, in, true)));
}

ResidualVector residual_comp_steady(const net::NetworkModel& model, const FluidSystem& sys,
                                    double x, double u) {
  require_fluid(sys, Fluid::ideal_gas);
  require_input(model, 2);
  const double in[2] = {x, u};
  const auto y = fields_at(model, in, false);
  eos_density(y.P * model.norm.P_ref, sys);
  return pack(pde_residual(sys, model.norm, Regime::steady, y));
}

ResidualVector residual_comp_transient(const net::NetworkModel& model, const FluidSystem& sys,
                                       double x, double t, double u0, double u) {
  require_fluid(sys, Fluid::ideal_gas);
  require_input(model, 4);
  const double in[4] = {x, t, u0, u};
  const auto y = fields_at(model, in, true);
  eos_density(y.P * model.norm.P_ref, sys);
  return pack(pde_residual(sys, model.norm, Regime::transient, y));
}

std::pair<double, double> bc_residuals(const net::NetworkModel& model, const FluidSystem& sys,
                                       std::optional<double> t, double u0, double u) {
  Eigen::VectorXd up, down;
  if (model.arch.input_dim == 2) {
    const double a[2] = {0.0, u};
    const double b[2] = {1.0, u};
    up = model(a);
    down = model(b);
  } else {
    require_input(model, 4);
    if (!t) throw ConfigError("transient boundary residual needs a time coordinate");
    const double a[4] = {0.0, *t, u0, u};
    const double b[4] = {1.0, *t, u0, u};
    up = model(a);
    down = model(b);
  }
  return {bc_upstream(sys, model.norm, up[0], up[1]), bc_downstream(down[0], u)};
}

std::array<double, 2> ic_residual(const net::NetworkModel& transient,
                                  const net::NetworkModel& steady, double x, double u0,
                                  double u) {
  require_input(transient, 4);
  require_input(steady, 2);
  const double tin[4] = {x, 0.0, u0, u};
  const double sin[2] = {x, u0};
  const Eigen::VectorXd a = transient(tin);
  const Eigen::VectorXd b = steady(sin);
  return {a[0] - b[0], a[1] - b[1]};
}

}  // namespace pinc::physics

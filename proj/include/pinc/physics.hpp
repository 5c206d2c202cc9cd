#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

#include "pinc/dual.hpp"
#include "pinc/error.hpp"
#include "pinc/net.hpp"
#include "pinc/normalization.hpp"

namespace pinc::physics {

enum class Fluid { incompressible, ideal_gas };
enum class FrictionModel { laminar, blasius, swamee_jain, colebrook };
enum class Regime { steady, transient };

std::string to_string(Fluid f);
std::string to_string(FrictionModel f);
std::string to_string(Regime r);
Fluid fluid_from_string(const std::string& s);
FrictionModel friction_from_string(const std::string& s);
Regime regime_from_string(const std::string& s);

/// SI units throughout. Incompressible systems use rho and k; ideal gas uses M, R, T and PI.
struct FluidSystem {
  Fluid fluid = Fluid::incompressible;
  double D = 0.1;
  double L = 100.0;
  double mu = 1e-3;
  double theta = 0.0;
  double g = 9.81;
  double eps = 0.0;
  double rho = 1000.0;
  double M = 0.03;
  double R = 8.314;
  double T = 300.0;
  double P_reservoir = 2e5;
  double k = 1e-5;
  double PI = 5e-4;
  FrictionModel friction = FrictionModel::blasius;
  double re_min = 100.0;
  double re_max = 1e8;

  double area() const { return std::numbers::pi * D * D / 4.0; }
  void validate() const;
  bool operator==(const FluidSystem&) const = default;
};

FluidSystem table1_system();
NormalizationRefs table1_refs();
FluidSystem table2_system();
NormalizationRefs table2_refs();

template <class T>
T reynolds(const T& rho, const T& V, const FluidSystem& sys) {
  const T re = rho * abs(V) * sys.D / sys.mu;
  if (value_of(re) < sys.re_min) return T(sys.re_min);
  if (value_of(re) > sys.re_max) return T(sys.re_max);
  return re;
}

template <class T>
T friction_factor(const T& re, const FluidSystem& sys) {
  using std::log10;
  using std::pow;
  using std::sqrt;
  switch (sys.friction) {
    case FrictionModel::laminar:
      return 64.0 / re;
    case FrictionModel::blasius:
      return 0.316 / pow(re, 0.25);
    case FrictionModel::swamee_jain: {
      const T lg = log10(sys.eps / (3.7 * sys.D) + 5.74 / pow(re, 0.9));
      return 0.25 / (lg * lg);
    }
    case FrictionModel::colebrook: {
      const T lg0 = log10(sys.eps / (3.7 * sys.D) + 5.74 / pow(re, 0.9));
      T f = 0.25 / (lg0 * lg0);
      for (int it = 0; it < 200; ++it) {
        const T inv = -2.0 * log10(sys.eps / (3.7 * sys.D) + 2.51 / (re * sqrt(f)));
        const T next = 1.0 / (inv * inv);
        const double change = std::fabs(value_of(next) - value_of(f));
        f = next;
        if (change < 1e-12) return f;
      }
      throw NumericalError("colebrook iteration did not converge in 200 iterations");
    }
  }
  return T(0.0);
}

inline double reynolds(double rho, double V, const FluidSystem& sys) {
  return reynolds<double>(rho, V, sys);
}
inline double friction_factor(double re, const FluidSystem& sys) {
  return friction_factor<double>(re, sys);
}

/// Constant density for liquids; P M / (R T) for the ideal gas, which requires P > 0.
double eos_density(double P, const FluidSystem& sys);

/// Gas density in reference units per unit normalized pressure: rho~ = kappa P~.
inline double gas_density_scale(const FluidSystem& sys, const NormalizationRefs& n) {
  return n.P_ref * sys.M / (sys.R * sys.T * n.rho_ref);
}

/// Network outputs and the input derivatives consumed by the residuals, at one point.
template <class T>
struct LocalFields {
  T P{}, V{};
  T dP_dx{}, dV_dx{};
  T dP_dt{}, dV_dt{};
};

/// (r_mass, r_momentum) in normalized form.
template <class T>
std::array<T, 2> pde_residual(const FluidSystem& sys, const NormalizationRefs& n, Regime regime,
                              const LocalFields<T>& y) {
  const double sin_t = std::sin(sys.theta);
  const bool transient = regime == Regime::transient;
  if (sys.fluid == Fluid::incompressible) {
    const T re = reynolds(T(sys.rho), y.V * n.V_ref, sys);
    const T f = friction_factor(re, sys);
    const T steady = (n.P_ref / (sys.rho * n.V_ref * n.x_ref)) * y.dP_dx +
                     sys.g * sin_t / n.V_ref + 0.5 * (n.V_ref / sys.D) * f * abs(y.V) * y.V;
    if (!transient) return {y.dV_dx, steady};
    return {y.dV_dx, y.dV_dt + n.t_ref * steady};
  }
  const double kappa = gas_density_scale(sys, n);
  const T rho = kappa * y.P;
  const T drho_dx = kappa * y.dP_dx;
  const T re = reynolds(rho * n.rho_ref, y.V * n.V_ref, sys);
  const T f = friction_factor(re, sys);
  const T flux_x = rho * y.dV_dx + y.V * drho_dx;                     // d(rho V)/dx
  const T mom_x = y.V * y.V * drho_dx + 2.0 * rho * y.V * y.dV_dx;    // d(rho V^2)/dx
  const T steady_mom = (n.V_ref / n.x_ref) * mom_x +
                       (n.P_ref / (n.rho_ref * n.V_ref * n.x_ref)) * y.dP_dx +
                       (sys.g * sin_t / n.V_ref) * rho +
                       0.5 * (n.V_ref / sys.D) * f * rho * abs(y.V) * y.V;
  if (!transient) return {flux_x, steady_mom};
  const T drho_dt = kappa * y.dP_dt;
  const T r_mass = drho_dt + (n.V_ref * n.t_ref / n.x_ref) * flux_x;
  const T r_mom = rho * y.dV_dt + y.V * drho_dt + n.t_ref * steady_mom;
  return {r_mass, r_mom};
}

/// Inflow law at x~ = 0.
template <class T>
T bc_upstream(const FluidSystem& sys, const NormalizationRefs& n, const T& P, const T& V) {
  if (sys.fluid == Fluid::incompressible) {
    return V - sys.k * (sys.P_reservoir - n.P_ref * P) / n.V_ref;
  }
  const T rho = gas_density_scale(sys, n) * P;
  return rho * V - sys.PI * (sys.P_reservoir - n.P_ref * P) / (n.rho_ref * n.V_ref * sys.area());
}

/// Outlet pressure equals the control at x~ = 1.
template <class T>
T bc_downstream(const T& P, double u) {
  return P - u;
}

struct ResidualVector {
  double r_mass = 0.0;
  double r_momentum = 0.0;
};

/// Pointwise residuals of a network. The network's normalization supplies the scales.
/// Ideal-gas forms raise NumericalError when the predicted pressure is not positive.
ResidualVector residual_inc_steady(const net::NetworkModel& model, const FluidSystem& sys,
                                   double x, double u);
ResidualVector residual_inc_transient(const net::NetworkModel& model, const FluidSystem& sys,
                                      double x, double t, double u0, double u);
ResidualVector residual_comp_steady(const net::NetworkModel& model, const FluidSystem& sys,
                                    double x, double u);
ResidualVector residual_comp_transient(const net::NetworkModel& model, const FluidSystem& sys,
                                       double x, double t, double u0, double u);

/// (r_upstream, r_downstream). Steady networks ignore t and u0.
std::pair<double, double> bc_residuals(const net::NetworkModel& model, const FluidSystem& sys,
                                       std::optional<double> t, double u0, double u);

/// transient(x, 0, u0, u) - steady(x, u0), per output.
std::array<double, 2> ic_residual(const net::NetworkModel& transient,
                                  const net::NetworkModel& steady, double x, double u0,
                                  double u);

}  // namespace pinc::physics

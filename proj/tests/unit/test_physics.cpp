#include <doctest.h>

#include <cmath>
#include <random>

#include "pinc/physics.hpp"

using namespace pinc;
using namespace pinc::physics;

namespace {

// A network whose outputs are the constants (p, v) everywhere.
net::NetworkModel constant_model(int input_dim, double p, double v, const NormalizationRefs& n) {
  net::NetworkModel m{{input_dim, 2, 1, 3, net::Activation::tanh, false}, {}, n};
  const net::ParameterLayout l(m.arch);
  m.params = net::ParameterVector::Zero(static_cast<Eigen::Index>(l.size()));
  m.params[static_cast<Eigen::Index>(l.index(1, net::Role::bias, 0))] = p;
  m.params[static_cast<Eigen::Index>(l.index(1, net::Role::bias, 1))] = v;
  return m;
}

net::NetworkModel random_model(int input_dim, std::uint64_t seed, const NormalizationRefs& n,
                               double p_offset) {
  net::NetworkModel m{{input_dim, 2, 2, 6, net::Activation::tanh, false}, {}, n};
  m.params = net::init_params(m.arch, seed);
  const net::ParameterLayout l(m.arch);
  m.params[static_cast<Eigen::Index>(l.index(2, net::Role::bias, 0))] = p_offset;
  m.params[static_cast<Eigen::Index>(l.index(2, net::Role::bias, 1))] = 0.8;
  return m;
}

// Residual assembled from central-difference derivatives of the network.
std::array<double, 2> fd_residual(const net::NetworkModel& m, const FluidSystem& sys, Regime r,
                                  std::vector<double> x) {
  const double h = 1e-6;
  auto diff = [&](int dim) {
    auto xp = x, xm = x;
    xp[static_cast<std::size_t>(dim)] += h;
    xm[static_cast<std::size_t>(dim)] -= h;
    return Eigen::VectorXd((m(xp) - m(xm)) / (2 * h));
  };
  const Eigen::VectorXd y = m(x);
  LocalFields<double> f;
  f.P = y[0];
  f.V = y[1];
  const Eigen::VectorXd dx = diff(0);
  f.dP_dx = dx[0];
  f.dV_dx = dx[1];
  if (r == Regime::transient) {
    const Eigen::VectorXd dt = diff(1);
    f.dP_dt = dt[0];
    f.dV_dt = dt[1];
  }
  return pde_residual(sys, m.norm, r, f);
}

double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-4}); }

}  // namespace

TEST_SUITE("physics") {

TEST_CASE("friction factor reference values") {
  FluidSystem s = table1_system();
  CHECK(friction_factor(1e4, s) == doctest::Approx(0.0316).epsilon(1e-14));
  CHECK(friction_factor(1e5, s) == doctest::Approx(0.01776998587601503).epsilon(1e-14));
  s.friction = FrictionModel::laminar;
  CHECK(friction_factor(1000.0, s) == doctest::Approx(0.064));
  s = table2_system();
  CHECK(friction_factor(1e6, s) == doctest::Approx(0.011606476119274452).epsilon(1e-14));
  s = table1_system();
  s.friction = FrictionModel::colebrook;
  CHECK(friction_factor(1e5, s) == doctest::Approx(0.01798977308427384).epsilon(1e-10));
}

TEST_CASE("Swamee-Jain stays within 3% of Colebrook for turbulent flow") {
  for (double rough : {0.0, 1e-5, 1e-4}) {
    FluidSystem sj = table1_system();
    sj.eps = rough;
    sj.friction = FrictionModel::swamee_jain;
    FluidSystem cb = sj;
    cb.friction = FrictionModel::colebrook;
    for (double lg = 4.0; lg <= 7.0; lg += 0.25) {
      const double re = std::pow(10.0, lg);
      const double a = friction_factor(re, sj);
      const double b = friction_factor(re, cb);
      CHECK(std::fabs(a - b) / b <= 0.03);
    }
  }
}

TEST_CASE("Reynolds number is clamped and uses |V|") {
  const FluidSystem s = table1_system();
  CHECK(reynolds(1000.0, 1.0, s) == doctest::Approx(1e5));
  CHECK(reynolds(1000.0, -1.0, s) == doctest::Approx(1e5));
  CHECK(reynolds(1000.0, 0.0, s) == s.re_min);
  CHECK(reynolds(1000.0, 1e9, s) == s.re_max);
  // Clamped regions carry no derivative.
  const auto re = reynolds(Dual<1>(1000.0), Dual<1>::variable(1e-9, 0), s);
  CHECK(re.d[0] == 0.0);
}

TEST_CASE("equation of state") {
  const FluidSystem gas = table2_system();
  CHECK(eos_density(5e6, gas) == doctest::Approx(60.13952369497234).epsilon(1e-14));
  CHECK(eos_density(2e6, gas) == doctest::Approx(2.0 * eos_density(1e6, gas)).epsilon(1e-15));
  CHECK_THROWS_AS(eos_density(0.0, gas), NumericalError);
  CHECK_THROWS_AS(eos_density(-1.0, gas), NumericalError);
  const FluidSystem liq = table1_system();
  CHECK(eos_density(-5.0, liq) == 1000.0);
  CHECK(gas_density_scale(gas, table2_refs()) * 60.0 == doctest::Approx(eos_density(5e6, gas)));
}

TEST_CASE("incompressible residual of a uniform flow") {
  const FluidSystem s = table1_system();
  const NormalizationRefs n = table1_refs();
  const auto ss = residual_inc_steady(constant_model(2, 0.7, 1.0, n), s, 0.3, 0.4);
  CHECK(ss.r_mass == 0.0);
  CHECK(ss.r_momentum == doctest::Approx(0.08884992938007515).epsilon(1e-13));
  const auto tr = residual_inc_transient(constant_model(4, 0.7, 1.0, n), s, 0.3, 0.2, 0.4, 0.5);
  CHECK(tr.r_mass == 0.0);
  CHECK(tr.r_momentum == doctest::Approx(0.8884992938007514).epsilon(1e-13));
}

TEST_CASE("boundary residuals") {
  const FluidSystem gas = table2_system();
  const NormalizationRefs n = table2_refs();
  CHECK(bc_upstream(gas, n, 0.7, 0.0) == doctest::Approx(-7.957747154594765).epsilon(1e-13));
  const double v = 7.957747154594765 / (gas_density_scale(gas, n) * 0.7);
  CHECK(std::fabs(bc_upstream(gas, n, 0.7, v)) <= 1e-12);
  const FluidSystem liq = table1_system();
  // V = k (P_res - P): 1e-5 * (2e5 - 1e5) = 1 m/s.
  CHECK(std::fabs(bc_upstream(liq, table1_refs(), 1.0, 1.0)) <= 1e-15);
  CHECK(bc_downstream(0.55, 0.5) == doctest::Approx(0.05));

  const auto m = constant_model(2, 0.6, 0.3, table1_refs());
  const auto [up, down] = bc_residuals(m, liq, std::nullopt, 0.0, 0.6);
  CHECK(std::fabs(down) <= 1e-15);
  CHECK(up == doctest::Approx(0.3 - 1e-5 * (2e5 - 0.6e5)));
  const auto mt = constant_model(4, 0.6, 0.3, table1_refs());
  CHECK_THROWS_AS(bc_residuals(mt, liq, std::nullopt, 0.5, 0.6), ConfigError);
}

TEST_CASE("initial-condition residual vanishes for a matching pair") {
  const NormalizationRefs n = table1_refs();
  const auto ic = ic_residual(constant_model(4, 0.4, 1.2, n), constant_model(2, 0.4, 1.2, n), 0.5, 0.3, 0.9);
  CHECK(ic[0] == 0.0);
  CHECK(ic[1] == 0.0);
  const auto off = ic_residual(constant_model(4, 0.5, 1.2, n), constant_model(2, 0.4, 1.0, n), 0.5, 0.3, 0.9);
  CHECK(off[0] == doctest::Approx(0.1));
  CHECK(off[1] == doctest::Approx(0.2));
}

TEST_CASE("residuals match finite-difference derivatives of the network") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int trial = 0; trial < 10; ++trial) {
    const double x = unif(gen), t = unif(gen), u0 = unif(gen), u = unif(gen);
    {
      const auto m = random_model(2, trial, table1_refs(), 0.5);
      const auto r = residual_inc_steady(m, table1_system(), x, u);
      const auto f = fd_residual(m, table1_system(), Regime::steady, {x, u});
      CHECK(rel_err(r.r_mass, f[0]) <= 1e-6);
      CHECK(rel_err(r.r_momentum, f[1]) <= 1e-6);
    }
    {
      const auto m = random_model(4, trial, table1_refs(), 0.5);
      const auto r = residual_inc_transient(m, table1_system(), x, t, u0, u);
      const auto f = fd_residual(m, table1_system(), Regime::transient, {x, t, u0, u});
      CHECK(rel_err(r.r_mass, f[0]) <= 1e-6);
      CHECK(rel_err(r.r_momentum, f[1]) <= 1e-6);
    }
    {
      const auto m = random_model(2, trial, table2_refs(), 3.0);
      const auto r = residual_comp_steady(m, table2_system(), x, u);
      const auto f = fd_residual(m, table2_system(), Regime::steady, {x, u});
      CHECK(rel_err(r.r_mass, f[0]) <= 1e-6);
      CHECK(rel_err(r.r_momentum, f[1]) <= 1e-6);
    }
    {
      const auto m = random_model(4, trial, table2_refs(), 3.0);
      const auto r = residual_comp_transient(m, table2_system(), x, t, u0, u);
      const auto f = fd_residual(m, table2_system(), Regime::transient, {x, t, u0, u});
      CHECK(rel_err(r.r_mass, f[0]) <= 1e-6);
      CHECK(rel_err(r.r_momentum, f[1]) <= 1e-6);
    }
  }
}

TEST_CASE("dual derivatives of the residual match finite differences") {
  const FluidSystem sys = table2_system();
  const NormalizationRefs n = table2_refs();
  LocalFields<double> base{0.9, 0.7, -0.05, 0.02, 0.01, -0.03};
  LocalFields<Dual<6>> y;
  y.P = Dual<6>::variable(base.P, 0);
  y.V = Dual<6>::variable(base.V, 1);
  y.dP_dx = Dual<6>::variable(base.dP_dx, 2);
  y.dV_dx = Dual<6>::variable(base.dV_dx, 3);
  y.dP_dt = Dual<6>::variable(base.dP_dt, 4);
  y.dV_dt = Dual<6>::variable(base.dV_dt, 5);
  const auto r = pde_residual(sys, n, Regime::transient, y);
  for (int k = 0; k < 6; ++k) {
    auto bump = [&](double h) {
      LocalFields<double> b = base;
      double* f[6] = {&b.P, &b.V, &b.dP_dx, &b.dV_dx, &b.dP_dt, &b.dV_dt};
      *f[k] += h;
      return pde_residual(sys, n, Regime::transient, b);
    };
    const auto p = bump(1e-6), m = bump(-1e-6);
    for (int o = 0; o < 2; ++o) {
      CHECK(rel_err(r[static_cast<std::size_t>(o)].d[static_cast<std::size_t>(k)],
                    (p[static_cast<std::size_t>(o)] - m[static_cast<std::size_t>(o)]) / 2e-6) <= 1e-6);
    }
  }
}

TEST_CASE("residual entry points validate their inputs") {
  const auto m2 = constant_model(2, 0.5, 0.5, table1_refs());
  const auto m4 = constant_model(4, 0.5, 0.5, table1_refs());
  CHECK_THROWS_AS(residual_inc_steady(m4, table1_system(), 0.1, 0.1), DimensionError);
  CHECK_THROWS_AS(residual_inc_transient(m2, table1_system(), 0.1, 0.1, 0.1, 0.1), DimensionError);
  CHECK_THROWS_AS(residual_comp_steady(m2, table1_system(), 0.1, 0.1), ConfigError);
  const auto neg = constant_model(2, -0.1, 0.5, table2_refs());
  CHECK_THROWS_AS(residual_comp_steady(neg, table2_system(), 0.1, 0.1), NumericalError);
}

TEST_CASE("string conversions round trip") {
  for (auto f : {Fluid::incompressible, Fluid::ideal_gas}) CHECK(fluid_from_string(to_string(f)) == f);
  for (auto f : {FrictionModel::laminar, FrictionModel::blasius, FrictionModel::swamee_jain, FrictionModel::colebrook}) {
    CHECK(friction_from_string(to_string(f)) == f);
  }
  CHECK_THROWS_AS(regime_from_string("quasi"), ConfigError);
}

}  // TEST_SUITE

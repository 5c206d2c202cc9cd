#include "pinc/plant.hpp"

#include <cmath>

#include "pinc/error.hpp"

namespace pinc::plant {

using physics::Fluid;
using physics::FluidSystem;

void PlantOptions::validate() const {
  if (n_cells < 2) throw ConfigError("plant grid needs at least 2 cells");
  if (!(steady_tol > 0 && transient_tol > 0)) throw ConfigError("plant tolerances must be > 0");
  if (max_newton < 1 || max_halvings < 0) throw ConfigError("invalid plant Newton limits");
}

namespace {

// Discrete equations for one solve. Unknowns are normalized: pressures by P_ref,
// velocities by V_ref. Gas: [P_in, P_0..P_{N-1}, V_0..V_N]. Liquid: [P_in, P_0..P_{N-1}, V].
class Discretization {
 public:
  Discretization(const FluidSystem& sys, const NormalizationRefs& norm, int n_cells, double P_out,
                 const PlantState* prev, double dt)
      : sys_(sys), norm_(norm), n_(n_cells), P_out_(P_out), grid_{n_cells, sys.L}, dt_(dt),
        gas_(sys.fluid == Fluid::ideal_gas) {
    if (prev) {
      transient_ = true;
      rho_prev_ = prev->rho;
      const double rho_in = density(prev->P_in);
      const double rho_out = density(prev->P_out);
      mom_prev_.resize(n_ + 1);
      for (int j = 0; j <= n_; ++j) {
        const double left = j == 0 ? rho_in : prev->rho[j - 1];
        const double right = j == n_ ? rho_out : prev->rho[j];
        mom_prev_[j] = 0.5 * (left + right) * prev->V[j];
      }
    }
  }

  int size() const { return gas_ ? 2 * n_ + 2 : n_ + 2; }

  Eigen::VectorXd pack(const PlantState& s) const {
    Eigen::VectorXd z(size());
    z[0] = s.P_in / norm_.P_ref;
    z.segment(1, n_) = s.P / norm_.P_ref;
    if (gas_) z.tail(n_ + 1) = s.V / norm_.V_ref;
    else z[n_ + 1] = s.V[0] / norm_.V_ref;
    return z;
  }

  PlantState unpack(const Eigen::VectorXd& z, double t) const {
    PlantState s;
    s.P_in = z[0] * norm_.P_ref;
    s.P = z.segment(1, n_) * norm_.P_ref;
    s.P_out = P_out_;
    if (gas_) s.V = z.tail(n_ + 1) * norm_.V_ref;
    else s.V = Eigen::VectorXd::Constant(n_ + 1, z[n_ + 1] * norm_.V_ref);
    s.rho.resize(n_);
    for (int i = 0; i < n_; ++i) s.rho[i] = density(s.P[i]);
    s.t = t;
    return s;
  }

  bool admissible(const Eigen::VectorXd& z) const {
    if (!z.allFinite()) return false;
    if (!gas_) return true;
    return z.head(n_ + 1).minCoeff() > 0.0;
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    return gas_ ? residual_gas(z) : residual_liquid(z);
  }

 private:
  double density(double P) const {
    return gas_ ? P * sys_.M / (sys_.R * sys_.T) : sys_.rho;
  }

  double friction_term(double rho, double V) const {
    const double f = physics::friction_factor(physics::reynolds(rho, V, sys_), sys_);
    return 0.5 * f * rho * V * std::fabs(V) / sys_.D;
  }

  Eigen::VectorXd residual_liquid(const Eigen::VectorXd& z) const {
    const double dx = grid_.dx();
    const double rho = sys_.rho;
    const double V = z[n_ + 1] * norm_.V_ref;
    const double P_in = z[0] * norm_.P_ref;
    Eigen::VectorXd r(size());
    r[0] = (V - sys_.k * (sys_.P_reservoir - P_in)) / norm_.V_ref;
    const double body = rho * sys_.g * std::sin(sys_.theta) + friction_term(rho, V);
    const double accel = transient_ ? rho * (V - mom_prev_[0] / rho) / dt_ : 0.0;
    const double scale = norm_.x_ref / norm_.P_ref;
    for (int j = 0; j <= n_; ++j) {
      const double left = j == 0 ? P_in : z[j] * norm_.P_ref;
      const double right = j == n_ ? P_out_ : z[j + 1] * norm_.P_ref;
      const double h = (j == 0 || j == n_) ? 0.5 * dx : dx;
      r[1 + j] = (accel + (right - left) / h + body) * scale;
    }
    return r;
  }

  Eigen::VectorXd residual_gas(const Eigen::VectorXd& z) const {
    const double dx = grid_.dx();
    const double P_in = z[0] * norm_.P_ref;
    const double rho_in = density(P_in);
    const double rho_out = density(P_out_);
    Eigen::VectorXd P = z.segment(1, n_) * norm_.P_ref;
    Eigen::VectorXd rho(n_);
    for (int i = 0; i < n_; ++i) rho[i] = density(P[i]);
    const Eigen::VectorXd V = z.tail(n_ + 1) * norm_.V_ref;

    auto left_rho = [&](int j) { return j == 0 ? rho_in : rho[j - 1]; };
    auto right_rho = [&](int j) { return j == n_ ? rho_out : rho[j]; };
    Eigen::VectorXd G(n_ + 1);  // upwind mass flux per face
    for (int j = 0; j <= n_; ++j) G[j] = (V[j] >= 0 ? left_rho(j) : right_rho(j)) * V[j];
    // Momentum flux at pressure nodes: inlet, cells, outlet.
    Eigen::VectorXd F(n_ + 2);
    F[0] = G[0] * V[0];
    for (int i = 0; i < n_; ++i) {
      F[1 + i] = (V[i] + V[i + 1] >= 0) ? G[i] * V[i] : G[i + 1] * V[i + 1];
    }
    F[n_ + 1] = G[n_] * V[n_];

    Eigen::VectorXd r(size());
    r[0] = (sys_.area() * G[0] - sys_.PI * (sys_.P_reservoir - P_in)) / (sys_.PI * norm_.P_ref);
    const double mass_scale = norm_.x_ref / (norm_.rho_ref * norm_.V_ref);
    for (int i = 0; i < n_; ++i) {
      const double ddt = transient_ ? (rho[i] - rho_prev_[i]) / dt_ : 0.0;
      r[1 + i] = (ddt + (G[i + 1] - G[i]) / dx) * mass_scale;
    }
    const double mom_scale = norm_.x_ref / norm_.P_ref;
    const double sin_t = std::sin(sys_.theta);
    for (int j = 0; j <= n_; ++j) {
      const double rho_f = 0.5 * (left_rho(j) + right_rho(j));
      const double left_P = j == 0 ? P_in : P[j - 1];
      const double right_P = j == n_ ? P_out_ : P[j];
      const double h = (j == 0 || j == n_) ? 0.5 * dx : dx;
      const double ddt = transient_ ? (rho_f * V[j] - mom_prev_[j]) / dt_ : 0.0;
      const double conv = (F[j + 1] - F[j]) / h;
      const double res = ddt + conv + (right_P - left_P) / h + rho_f * sys_.g * sin_t +
                         friction_term(rho_f, V[j]);
      r[1 + n_ + j] = res * mom_scale;
    }
    return r;
  }

  const FluidSystem& sys_;
  const NormalizationRefs& norm_;
  int n_;
  double P_out_;
  PlantGrid grid_;
  double dt_;
  bool gas_;
  bool transient_ = false;
  Eigen::VectorXd rho_prev_;
  Eigen::VectorXd mom_prev_;
};

bool newton(const Discretization& d, Eigen::VectorXd& z, double tol, int max_iter) {
  Eigen::VectorXd r = d.residual(z);
  double norm = r.lpNorm<Eigen::Infinity>();
  if (!std::isfinite(norm)) return false;
  const int n = d.size();
  Eigen::MatrixXd J(n, n);
  for (int it = 0; it < max_iter; ++it) {
    if (norm <= tol) return true;
    for (int c = 0; c < n; ++c) {
      const double h = 1e-7 * std::max(1.0, std::fabs(z[c]));
      Eigen::VectorXd zp = z;
      zp[c] += h;
      J.col(c) = (d.residual(zp) - r) / h;
    }
    const Eigen::VectorXd step = J.partialPivLu().solve(-r);
    if (!step.allFinite()) return false;
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, alpha *= 0.5) {
      const Eigen::VectorXd trial = z + alpha * step;
      if (!d.admissible(trial)) continue;
      const Eigen::VectorXd rt = d.residual(trial);
      const double nt = rt.lpNorm<Eigen::Infinity>();
      if (std::isfinite(nt) && nt < (1.0 - 1e-4 * alpha) * norm) {
        z = trial;
        r = rt;
        norm = nt;
        accepted = true;
        break;
      }
    }
    if (!accepted) return norm <= tol;
  }
  return norm <= tol;
}

// Isothermal estimate neglecting acceleration: P_in^2 - P_out^2 = f G|G| R T L / (D M).
PlantState gas_initial_guess(const FluidSystem& sys, double P_out, int n_cells) {
  const double A = sys.area();
  const double c = sys.R * sys.T * sys.L / (sys.D * sys.M);
  auto flux = [&](double P_in) { return sys.PI * (sys.P_reservoir - P_in) / A; };
  auto h = [&](double P_in) {
    const double G = flux(P_in);
    const double f = physics::friction_factor(physics::reynolds(1.0, G, sys), sys);
    return P_in * P_in - P_out * P_out - f * G * std::fabs(G) * c;
  };
  double lo = std::min(P_out, sys.P_reservoir);
  double hi = std::max(P_out, sys.P_reservoir);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((h(mid) > 0) == (h(hi) > 0) ? hi : lo) = mid;
  }
  const double P_in = 0.5 * (lo + hi);
  const double G = flux(P_in);
  const PlantGrid grid{n_cells, sys.L};
  auto pressure = [&](double x) {
    const double sq = P_in * P_in - (P_in * P_in - P_out * P_out) * x / sys.L;
    return std::sqrt(std::max(sq, 1e-6 * P_out * P_out));
  };
  PlantState s;
  s.P_in = P_in;
  s.P_out = P_out;
  s.P.resize(n_cells);
  s.rho.resize(n_cells);
  s.V.resize(n_cells + 1);
  for (int i = 0; i < n_cells; ++i) {
    s.P[i] = pressure(grid.center(i));
    s.rho[i] = physics::eos_density(s.P[i], sys);
  }
  for (int j = 0; j <= n_cells; ++j) {
    s.V[j] = G / physics::eos_density(pressure(grid.face(j)), sys);
  }
  return s;
}

void check_control(double u) {
  if (!(u >= 0 && u <= 1)) throw ConfigError("control must lie in [0, 1]");
}

PlantState advance(const FluidSystem& sys, const NormalizationRefs& norm, const PlantState& s,
                   double u, double dt, const PlantOptions& opts, int level) {
  const Discretization d(sys, norm, opts.n_cells, u * norm.P_ref, &s, dt);
  PlantState start = s;
  start.P_out = u * norm.P_ref;
  Eigen::VectorXd z = d.pack(start);
  if (newton(d, z, opts.transient_tol, opts.max_newton)) return d.unpack(z, s.t + dt);
  if (level >= opts.max_halvings) {
    throw NumericalError("plant Newton iteration diverged after " + std::to_string(level) +
                         " step halvings at t = " + std::to_string(s.t));
  }
  const PlantState mid = advance(sys, norm, s, u, 0.5 * dt, opts, level + 1);
  return advance(sys, norm, mid, u, 0.5 * dt, opts, level + 1);
}

}  // namespace

IncSteady steady_solve_inc(const FluidSystem& sys, const NormalizationRefs& norm, double u) {
  check_control(u);
  if (sys.fluid != Fluid::incompressible) throw ConfigError("steady_solve_inc needs a liquid");
  const double P_out = u * norm.P_ref;
  auto F = [&](double V) {
    const double f = physics::friction_factor(physics::reynolds(sys.rho, V, sys), sys);
    const double loss = sys.rho * sys.g * std::sin(sys.theta) + 0.5 * sys.rho * f * V * std::fabs(V) / sys.D;
    return sys.k * (sys.P_reservoir - P_out - loss * sys.L);
  };
  IncSteady r;
  r.P_out = P_out;
  double V = 0.0;
  double omega = 1.0;
  double last_change = INFINITY;
  for (int it = 1; it <= 10000; ++it) {
    const double next = (1.0 - omega) * V + omega * F(V);
    const double change = std::fabs(next - V);
    V = next;
    r.iterations = it;
    if (change <= 1e-12) {
      r.V = V;
      r.P0 = sys.P_reservoir - V / sys.k;
      return r;
    }
    if (change > last_change) omega *= 0.5;
    last_change = change;
  }
  throw NumericalError("incompressible steady fixed point did not converge in 10000 iterations");
}

PlantState steady_solve_comp(const FluidSystem& sys, const NormalizationRefs& norm, double u,
                             const PlantOptions& opts) {
  check_control(u);
  opts.validate();
  if (sys.fluid != Fluid::ideal_gas) throw ConfigError("steady_solve_comp needs an ideal gas");
  if (!(u > 0)) throw NumericalError("ideal gas outlet pressure must be positive");
  const double P_out = u * norm.P_ref;
  const Discretization d(sys, norm, opts.n_cells, P_out, nullptr, 0.0);
  Eigen::VectorXd z = d.pack(gas_initial_guess(sys, P_out, opts.n_cells));
  if (newton(d, z, opts.steady_tol, opts.max_newton)) return d.unpack(z, 0.0);
  // Continuation from zero drawdown towards the requested control.
  const double u_start = std::min(1.0, sys.P_reservoir / norm.P_ref);
  Eigen::VectorXd zc = d.pack(gas_initial_guess(sys, u_start * norm.P_ref, opts.n_cells));
  const int stages = 20;
  for (int k = 1; k <= stages; ++k) {
    const double uk = u_start + (u - u_start) * k / stages;
    const Discretization dk(sys, norm, opts.n_cells, uk * norm.P_ref, nullptr, 0.0);
    if (!newton(dk, zc, opts.steady_tol, 4 * opts.max_newton)) {
      throw NumericalError("compressible steady solve failed near u = " + std::to_string(uk) +
                           " (choked or unphysical configuration)");
    }
  }
  return d.unpack(zc, 0.0);
}

PlantState steady_state(const FluidSystem& sys, const NormalizationRefs& norm, double u,
                        const PlantOptions& opts) {
  opts.validate();
  if (sys.fluid == Fluid::ideal_gas) return steady_solve_comp(sys, norm, u, opts);
  const IncSteady ss = steady_solve_inc(sys, norm, u);
  const PlantGrid grid{opts.n_cells, sys.L};
  PlantState s;
  s.P_in = ss.P0;
  s.P_out = ss.P_out;
  s.P.resize(opts.n_cells);
  for (int i = 0; i < opts.n_cells; ++i) {
    s.P[i] = ss.P0 + (ss.P_out - ss.P0) * grid.center(i) / sys.L;
  }
  s.rho = Eigen::VectorXd::Constant(opts.n_cells, sys.rho);
  s.V = Eigen::VectorXd::Constant(opts.n_cells + 1, ss.V);
  return s;
}

PlantState step_transient(const FluidSystem& sys, const NormalizationRefs& norm,
                          const PlantState& state, double u, double dt, const PlantOptions& opts) {
  check_control(u);
  opts.validate();
  if (!(dt > 0)) throw ConfigError("time step must be positive");
  if (state.P.size() != opts.n_cells) throw DimensionError("state does not match plant grid");
  if (sys.fluid == Fluid::ideal_gas && !(u > 0)) {
    throw NumericalError("ideal gas outlet pressure must be positive");
  }
  return advance(sys, norm, state, u, dt, opts, 0);
}

Eigen::VectorXd steady_residual(const FluidSystem& sys, const NormalizationRefs& norm,
                                const PlantState& state) {
  const Discretization d(sys, norm, static_cast<int>(state.P.size()), state.P_out, nullptr, 0.0);
  return d.residual(d.pack(state));
}

Eigen::VectorXd face_mass_flow(const FluidSystem& sys, const PlantState& s) {
  const int n = static_cast<int>(s.P.size());
  Eigen::VectorXd m(n + 1);
  for (int j = 0; j <= n; ++j) {
    double rho = 0.0;
    if (s.V[j] >= 0) rho = j == 0 ? physics::eos_density(s.P_in, sys) : s.rho[j - 1];
    else rho = j == n ? physics::eos_density(s.P_out, sys) : s.rho[j];
    m[j] = rho * s.V[j] * sys.area();
  }
  return m;
}

ProbeSample probe(const FluidSystem& sys, const PlantState& s, double x) {
  if (!(x >= 0 && x <= 1)) throw ConfigError("probe position must lie in [0, 1]");
  const int n = static_cast<int>(s.P.size());
  const PlantGrid grid{n, sys.L};
  const double X = x * sys.L;
  // Pressure nodes: 0, centers, L.
  double P = 0.0;
  if (X <= grid.center(0)) {
    P = s.P_in + (s.P[0] - s.P_in) * X / grid.center(0);
  } else if (X >= grid.center(n - 1)) {
    const double w = (X - grid.center(n - 1)) / (sys.L - grid.center(n - 1));
    P = s.P[n - 1] + (s.P_out - s.P[n - 1]) * w;
  } else {
    const int i = std::min(n - 2, static_cast<int>((X - grid.center(0)) / grid.dx()));
    const double w = (X - grid.center(i)) / grid.dx();
    P = s.P[i] + (s.P[i + 1] - s.P[i]) * w;
  }
  const int j = std::min(n - 1, static_cast<int>(X / grid.dx()));
  const double wv = (X - grid.face(j)) / grid.dx();
  const double V = s.V[j] + (s.V[j + 1] - s.V[j]) * wv;
  ProbeSample out;
  out.P = P;
  out.V = V;
  out.rho = sys.fluid == Fluid::ideal_gas ? physics::eos_density(P, sys) : sys.rho;
  out.mdot = out.rho * V * sys.area();
  return out;
}

Trajectory simulate_plant(const FluidSystem& sys, const NormalizationRefs& norm,
                          const ControlSchedule& schedule, double dt,
                          std::span<const double> probes, const PlantOptions& opts) {
  schedule.validate();
  const double T = schedule.window_seconds;
  const long steps = std::lround(T / dt);
  if (!(dt > 0) || steps < 1 || std::fabs(steps * dt - T) > 1e-9 * T) {
    throw ConfigError("plant time step must divide the window length");
  }
  const int M = schedule.steps_per_window;
  if (steps % (M - 1) != 0) {
    throw ConfigError("window step count must be a multiple of (samples per window - 1)");
  }
  const long stride = steps / (M - 1);
  Trajectory traj;
  traj.has_gas_columns = sys.fluid == Fluid::ideal_gas;
  PlantState s = steady_state(sys, norm, schedule.u0, opts);
  auto record = [&](std::size_t k, int j) {
    for (double x : probes) {
      const ProbeSample p = probe(sys, s, x);
      TrajectoryRow r;
      r.t_seconds = static_cast<double>(k - 1) * T + j * T / (M - 1);
      r.window_index = static_cast<int>(k);
      r.u = schedule.windows[k - 1];
      r.probe_x = x;
      r.P_pa = p.P;
      r.V_ms = p.V;
      if (traj.has_gas_columns) {
        r.rho_kgm3 = p.rho;
        r.mdot_kgs = p.mdot;
      }
      traj.rows.push_back(r);
    }
  };
  for (std::size_t k = 1; k <= schedule.windows.size(); ++k) {
    const double u = schedule.windows[k - 1];
    record(k, 0);
    for (long step = 1; step <= steps; ++step) {
      s = step_transient(sys, norm, s, u, dt, opts);
      if (step % stride == 0) record(k, static_cast<int>(step / stride));
    }
  }
  return traj;
}

}  // namespace pinc::plant

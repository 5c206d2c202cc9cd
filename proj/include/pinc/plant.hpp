#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "pinc/normalization.hpp"
#include "pinc/physics.hpp"
#include "pinc/trajectory.hpp"

namespace pinc::plant {

/// Uniform staggered grid: pressures at cell centers, velocities on the n_cells + 1 faces.
struct PlantGrid {
  int n_cells = 50;
  double length = 1.0;

  double dx() const { return length / n_cells; }
  double center(int i) const { return (i + 0.5) * dx(); }
  double face(int j) const { return j * dx(); }
};

/// Discrete plant state. P_in and P_out are the boundary pressures at x = 0 and x = L.
/// For liquids every face velocity is the same scalar.
struct PlantState {
  Eigen::VectorXd P;    // Pa, per cell
  Eigen::VectorXd rho;  // kg/m3, per cell
  Eigen::VectorXd V;    // m/s, per face
  double P_in = 0.0;
  double P_out = 0.0;
  double t = 0.0;
};

struct PlantOptions {
  int n_cells = 50;
  double steady_tol = 1e-10;     // scaled residual, infinity norm
  double transient_tol = 1e-8;
  int max_newton = 60;
  int max_halvings = 6;

  void validate() const;
};

struct IncSteady {
  double V = 0.0;   // m/s
  double P0 = 0.0;  // Pa at x = 0
  double P_out = 0.0;
  int iterations = 0;
};

/// Damped fixed point V = k (P_res - P_out - (rho g sin(theta) + rho f V|V| / (2D)) L).
IncSteady steady_solve_inc(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                           double u);

/// Steady staggered system solved by damped Newton with a finite-difference Jacobian.
PlantState steady_solve_comp(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                             double u, const PlantOptions& opts = {});

/// Steady state of either fluid on the plant grid.
PlantState steady_state(const physics::FluidSystem& sys, const NormalizationRefs& norm, double u,
                        const PlantOptions& opts = {});

/// One backward-Euler step with outlet pressure u P_ref. Newton failures halve the step,
/// up to opts.max_halvings levels, before raising NumericalError.
PlantState step_transient(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                          const PlantState& state, double u, double dt,
                          const PlantOptions& opts = {});

/// Scaled residual of the discrete equations at `state`; zero at a converged steady state.
Eigen::VectorXd steady_residual(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                                const PlantState& state);

/// Mass flow through every face, upwind density times velocity times area.
Eigen::VectorXd face_mass_flow(const physics::FluidSystem& sys, const PlantState& state);

struct ProbeSample {
  double P = 0.0;
  double V = 0.0;
  double rho = 0.0;
  double mdot = 0.0;
};

/// Linear interpolation from grid nodes at normalized position x in [0, 1].
/// Pressure nodes are the inlet, the cell centers and the outlet; velocity nodes are faces.
ProbeSample probe(const physics::FluidSystem& sys, const PlantState& state, double x);

/// Steady start at u0, then each window held for window_seconds with step dt.
/// Samples every window at steps_per_window evenly spaced instants, both ends included.
Trajectory simulate_plant(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                          const ControlSchedule& schedule, double dt,
                          std::span<const double> probes, const PlantOptions& opts = {});

}  // namespace pinc::plant

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pinc/net.hpp"
#include "pinc/physics.hpp"
#include "pinc/plant.hpp"

namespace pinc::mpc {

struct MpcConfig {
  int n_p = 10;
  int n_c = 2;
  double T_s = 1.0;          // s
  double lambda = 1e-2;      // move penalty
  double dy_max = 0.0667;    // normalized output move bound
  double y_target = 0.0;     // normalized
  std::optional<double> y_min;
  std::optional<double> du_max;  // hard bound on |u_i - u_{i-1}|
  double x_probe = 0.1;      // normalized measurement position
  bool first_step_constraint = true;
  bool move_constraints = true;  // consecutive prediction moves

  double tol = 1e-6;
  int max_outer = 60;
  int max_inner = 300;
  int init_grid = 11;        // points per decision variable for the start search, 0 disables

  void validate(const NormalizationRefs& norm) const;
};

/// Output model used by the controller: y_i for i = 1..N_p given u_0 and the N_c moves,
/// with u_i = u_{N_c} for i > N_c.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Eigen::VectorXd predict(double u0, const Eigen::VectorXd& moves) const = 0;
  /// d y / d moves, N_p x N_c. Default: central differences inside the box.
  virtual Eigen::MatrixXd jacobian(double u0, const Eigen::VectorXd& moves) const;
  /// Latest plant state, delivered before every horizon solve.
  virtual void observe(const plant::PlantState&) {}
  /// True when y_i = y_{N_c + 1} for all i > N_c, which lets the solver drop duplicate rows.
  virtual bool settles_after_control_horizon() const { return false; }
};

/// y_i = P~(x_probe, T_s / t_ref, u_{i-1}, u_i) from a transient network.
class PincPredictor : public Predictor {
 public:
  PincPredictor(const net::NetworkModel& model, const MpcConfig& cfg);
  Eigen::VectorXd predict(double u0, const Eigen::VectorXd& moves) const override;
  Eigen::MatrixXd jacobian(double u0, const Eigen::VectorXd& moves) const override;
  bool settles_after_control_horizon() const override { return true; }

 private:
  Eigen::MatrixXd inputs(double u0, const Eigen::VectorXd& moves) const;
  const net::NetworkModel& model_;
  MpcConfig cfg_;
};

/// Perfect model: simulates the plant itself from the last observed state.
class PlantPredictor : public Predictor {
 public:
  PlantPredictor(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                 const plant::PlantOptions& opts, double dt, const MpcConfig& cfg);
  Eigen::VectorXd predict(double u0, const Eigen::VectorXd& moves) const override;
  void observe(const plant::PlantState& state) override { state_ = state; }

 private:
  physics::FluidSystem sys_;
  NormalizationRefs norm_;
  plant::PlantOptions opts_;
  double dt_;
  MpcConfig cfg_;
  plant::PlantState state_;
};

struct MpcSolution {
  Eigen::VectorXd moves;      // u_1..u_{N_c}
  Eigen::VectorXd predicted;  // y_1..y_{N_p} without bias
  double objective = 0.0;
  double violation = 0.0;     // largest constraint excess
  double projected_gradient = 0.0;
  std::string status;         // converged, stalled, max_outer, infeasible, grid
  int outer_iterations = 0;
  std::vector<double> incumbent_objective;  // best feasible objective after each outer iteration
};

/// Objective and constraints of one horizon, exposed for oracles and tests.
struct HorizonProblem {
  const Predictor& predictor;
  const MpcConfig& cfg;
  double u0;
  double y0;
  double bias;

  double objective(const Eigen::VectorXd& moves, const Eigen::VectorXd& y) const;
  /// Constraint values g(moves) <= 0.
  Eigen::VectorXd constraints(const Eigen::VectorXd& moves, const Eigen::VectorXd& y) const;
  double violation(const Eigen::VectorXd& moves) const;
};

MpcSolution solve_horizon(const Predictor& predictor, const MpcConfig& cfg, double u0, double y0,
                          double bias);

struct StepRecord {
  double t_seconds = 0.0;
  double u_applied = 0.0;
  double y_measured_pa = 0.0;
  double y_pred_pa = 0.0;
  double bias_pa = 0.0;
  std::string solve_status;
  double objective = 0.0;
};

struct ClosedLoopResult {
  std::vector<StepRecord> history;
  int violations = 0;  // measured moves above 1.25 dy_max
};

/// (start time in s, normalized bound); the latest entry not after t is active.
using BoundSchedule = std::vector<std::pair<double, double>>;

/// Measure, update bias, solve, apply the first move for T_s, repeat.
ClosedLoopResult closed_loop(Predictor& predictor, const physics::FluidSystem& sys,
                             const NormalizationRefs& norm, const plant::PlantOptions& plant_opts,
                             double dt, const MpcConfig& cfg, double u0_init, double duration,
                             const BoundSchedule& y_min_schedule = {});

int count_rate_violations(const std::vector<StepRecord>& history, double dy_max_pa);

void write_closed_loop_csv(const ClosedLoopResult& result, const std::string& path);

}  // namespace pinc::mpc

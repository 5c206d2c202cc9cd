#pragma once

#include <string>
#include <vector>

#include "pinc/config.hpp"
#include "pinc/metrics.hpp"
#include "pinc/mpc.hpp"
#include "pinc/trajectory.hpp"
#include "pinc/training.hpp"

namespace pinc::workflows {

struct TrainOutput {
  training::TrainResult result;
  std::vector<training::SeedOutcome> sweep;  // empty unless [run] seeds lists several seeds
};

/// Trains one regime. A seed sweep sets both sampling and weight seeds per entry of
/// [run] seeds and keeps the lowest final validation loss.
TrainOutput train(const config::RunConfig& cfg, physics::Regime regime,
                  const net::NetworkModel* steady_model, int threads, bool verbose);

ControlSchedule schedule(const config::RunConfig& cfg, double u0, std::vector<double> windows);
ControlSchedule read_schedule(const config::RunConfig& cfg, const std::string& path);

Trajectory simulate_plant(const config::RunConfig& cfg, const ControlSchedule& schedule);
Trajectory simulate_pinc(const config::RunConfig& cfg, const net::NetworkModel& model,
                         const ControlSchedule& schedule);

/// Closed loop driven by the transient network, or by the plant itself when model is null.
mpc::ClosedLoopResult run_mpc(const config::RunConfig& cfg, const net::NetworkModel* model);

struct SteadyComparison {
  double mape_P = 0.0;
  double mape_V = 0.0;
};

/// Model against plant steady profiles over [run] eval_controls and eval_positions evenly
/// spaced positions. A transient model is evaluated at t = 0 with u0 = u.
SteadyComparison compare_steady(const config::RunConfig& cfg, const net::NetworkModel& model);

std::vector<metrics::MetricRow> evaluate(const Trajectory& truth, const Trajectory& estimate);

}  // namespace pinc::workflows

#include "pinc/workflows.hpp"

#include <cmath>

#include "pinc/error.hpp"
#include "pinc/forwardsim.hpp"
#include "pinc/plant.hpp"

namespace pinc::workflows {

TrainOutput train(const config::RunConfig& cfg, physics::Regime regime,
                  const net::NetworkModel* steady_model, int threads, bool verbose) {
  const bool transient = regime == physics::Regime::transient;
  if (transient && !steady_model) {
    throw ConfigError("transient training needs a steady-state model");
  }
  training::TrainingConfig tc = transient ? cfg.transient_training : cfg.steady_training;
  tc.threads = threads;
  tc.verbose = verbose;
  net::Architecture arch = transient ? cfg.transient_arch : cfg.steady_arch;
  arch.input_dim = transient ? 4 : 2;
  arch.output_dim = 2;
  auto run = [&](const training::TrainingConfig& t) {
    return transient ? training::train_transient(cfg.system, cfg.norm, arch, t, *steady_model)
                     : training::train_steady(cfg.system, cfg.norm, arch, t);
  };
  TrainOutput out;
  if (cfg.run.seeds.size() <= 1) {
    if (cfg.run.seeds.size() == 1) tc.sampling_seed = tc.weight_seed = cfg.run.seeds[0];
    out.result = run(tc);
    return out;
  }
  auto sweep = training::seed_sweep(
      cfg.run.seeds,
      [&](std::uint64_t s) {
        training::TrainingConfig t = tc;
        t.sampling_seed = t.weight_seed = s;
        return run(t);
      },
      [](const training::TrainResult& r) {
        return r.report.final_validation ? r.report.final_validation->total
                                         : std::numeric_limits<double>::infinity();
      });
  out.sweep = sweep.outcomes;
  out.result = std::move(sweep.best_result);
  return out;
}

ControlSchedule schedule(const config::RunConfig& cfg, double u0, std::vector<double> windows) {
  ControlSchedule s;
  s.u0 = u0;
  s.windows = std::move(windows);
  s.window_seconds = cfg.window_seconds();
  s.steps_per_window = cfg.run.steps_per_window;
  s.validate();
  return s;
}

ControlSchedule read_schedule(const config::RunConfig& cfg, const std::string& path) {
  return pinc::read_schedule(path, cfg.window_seconds(), cfg.run.steps_per_window);
}

Trajectory simulate_plant(const config::RunConfig& cfg, const ControlSchedule& schedule) {
  return plant::simulate_plant(cfg.system, cfg.norm, schedule, cfg.plant_dt, cfg.run.probes,
                               cfg.plant);
}

Trajectory simulate_pinc(const config::RunConfig& cfg, const net::NetworkModel& model,
                         const ControlSchedule& schedule) {
  if (!(model.norm == cfg.norm)) {
    throw ConfigError("model normalization differs from the configuration");
  }
  return forwardsim::pinc_forward(model, cfg.system, schedule, cfg.run.probes);
}

mpc::ClosedLoopResult run_mpc(const config::RunConfig& cfg, const net::NetworkModel* model) {
  const mpc::MpcConfig& mc = cfg.mpc.controller;
  if (model) {
    if (!(model->norm == cfg.norm)) {
      throw ConfigError("model normalization differs from the configuration");
    }
    mpc::PincPredictor predictor(*model, mc);
    return mpc::closed_loop(predictor, cfg.system, cfg.norm, cfg.plant, cfg.plant_dt, mc,
                            cfg.mpc.u0, cfg.mpc.duration, cfg.mpc.y_min_schedule);
  }
  mpc::PlantPredictor predictor(cfg.system, cfg.norm, cfg.plant, cfg.plant_dt, mc);
  return mpc::closed_loop(predictor, cfg.system, cfg.norm, cfg.plant, cfg.plant_dt, mc, cfg.mpc.u0,
                          cfg.mpc.duration, cfg.mpc.y_min_schedule);
}

SteadyComparison compare_steady(const config::RunConfig& cfg, const net::NetworkModel& model) {
  const bool transient = model.arch.input_dim == 4;
  const int nx = cfg.run.eval_positions;
  const auto& us = cfg.run.eval_controls;
  if (us.empty()) throw ConfigError("no evaluation controls configured");
  Eigen::MatrixXd in(model.arch.input_dim, static_cast<Eigen::Index>(us.size()) * nx);
  std::vector<double> P_true, V_true;
  Eigen::Index c = 0;
  for (double u : us) {
    const plant::PlantState s = plant::steady_state(cfg.system, cfg.norm, u, cfg.plant);
    for (int i = 0; i < nx; ++i) {
      const double x = static_cast<double>(i) / (nx - 1);
      const plant::ProbeSample p = plant::probe(cfg.system, s, x);
      P_true.push_back(p.P);
      V_true.push_back(p.V);
      if (transient) {
        in.col(c) << x, 0.0, u, u;
      } else {
        in.col(c) << x, u;
      }
      ++c;
    }
  }
  const Eigen::MatrixXd out = net::evaluate_batch(model.arch, model.params, in, {}).value;
  std::vector<double> P_est(P_true.size()), V_est(V_true.size());
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    P_est[static_cast<std::size_t>(k)] = out(0, k) * model.norm.P_ref;
    V_est[static_cast<std::size_t>(k)] = out(1, k) * model.norm.V_ref;
  }
  return {metrics::mape(P_true, P_est), metrics::mape(V_true, V_est)};
}

std::vector<metrics::MetricRow> evaluate(const Trajectory& truth, const Trajectory& estimate) {
  return metrics::compare_trajectories(truth, estimate);
}

}  // namespace pinc::workflows

#include "pinc/forwardsim.hpp"

#include <cmath>

#include "pinc/error.hpp"

namespace pinc::forwardsim {

namespace {

void check_model(const net::NetworkModel& model) {
  if (model.arch.input_dim != 4 || model.arch.output_dim != 2) {
    throw DimensionError("forward simulation needs a transient network (x, t, u0, u) -> (P, V)");
  }
}

// One column per (window, sample, position), in that nesting order.
Eigen::MatrixXd request(const ControlSchedule& s, const NormalizationRefs& norm,
                        std::span<const double> positions) {
  const int M = s.steps_per_window;
  const Eigen::Index n = static_cast<Eigen::Index>(s.windows.size() * M * positions.size());
  Eigen::MatrixXd in(4, n);
  Eigen::Index c = 0;
  for (std::size_t k = 1; k <= s.windows.size(); ++k) {
    for (int j = 0; j < M; ++j) {
      for (double x : positions) {
        in(0, c) = x;
        in(1, c) = window_time(s, norm, j);
        in(2, c) = s.control_before(k - 1);
        in(3, c) = s.windows[k - 1];
        ++c;
      }
    }
  }
  return in;
}

}  // namespace

double window_time(const ControlSchedule& schedule, const NormalizationRefs& norm, int j) {
  const double span = schedule.window_seconds / norm.t_ref;
  return (static_cast<double>(j) / (schedule.steps_per_window - 1)) * span;
}

Trajectory pinc_forward(const net::NetworkModel& model, const physics::FluidSystem& sys,
                        const ControlSchedule& schedule, std::span<const double> positions) {
  check_model(model);
  schedule.validate();
  if (schedule.window_seconds > model.norm.t_ref * (1.0 + 1e-12)) {
    throw ConfigError("window length exceeds the trained time range t_ref");
  }
  const NormalizationRefs& n = model.norm;
  const Eigen::MatrixXd in = request(schedule, n, positions);
  const Eigen::MatrixXd out = net::evaluate_batch(model.arch, model.params, in, {}).value;
  Trajectory traj;
  traj.has_gas_columns = sys.fluid == physics::Fluid::ideal_gas;
  traj.rows.reserve(static_cast<std::size_t>(in.cols()));
  const int M = schedule.steps_per_window;
  Eigen::Index c = 0;
  for (std::size_t k = 1; k <= schedule.windows.size(); ++k) {
    for (int j = 0; j < M; ++j) {
      for (double x : positions) {
        TrajectoryRow r;
        r.t_seconds = static_cast<double>(k - 1) * schedule.window_seconds +
                      j * schedule.window_seconds / (M - 1);
        r.window_index = static_cast<int>(k);
        r.u = schedule.windows[k - 1];
        r.probe_x = x;
        r.P_pa = out(0, c) * n.P_ref;
        r.V_ms = out(1, c) * n.V_ref;
        if (traj.has_gas_columns) {
          // The EOS is linear, so a non-positive predicted pressure yields a non-physical density
          // rather than an exception here; the row is still reported.
          r.rho_kgm3 = r.P_pa * sys.M / (sys.R * sys.T);
          r.mdot_kgs = r.rho_kgm3 * r.V_ms * sys.area();
        }
        traj.rows.push_back(r);
        ++c;
      }
    }
  }
  return traj;
}

std::vector<std::vector<Eigen::Vector2d>> window_outputs(const net::NetworkModel& model,
                                                          const ControlSchedule& schedule,
                                                          double x) {
  check_model(model);
  schedule.validate();
  const double pos[1] = {x};
  const Eigen::MatrixXd in = request(schedule, model.norm, pos);
  const Eigen::MatrixXd out = net::evaluate_batch(model.arch, model.params, in, {}).value;
  const int M = schedule.steps_per_window;
  std::vector<std::vector<Eigen::Vector2d>> w(schedule.windows.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    for (int j = 0; j < M; ++j) w[k].push_back(out.col(static_cast<Eigen::Index>(k * M + j)));
  }
  return w;
}

std::vector<SeamGap> window_seam_gap(const net::NetworkModel& model,
                                     const ControlSchedule& schedule, double x) {
  if (schedule.windows.size() < 2) throw ConfigError("seam gaps need at least two windows");
  const auto w = window_outputs(model, schedule, x);
  std::vector<SeamGap> gaps;
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    const Eigen::Vector2d d = (w[k].back() - w[k + 1].front()).cwiseAbs();
    gaps.push_back({d[0], d[1]});
  }
  return gaps;
}

}  // namespace pinc::forwardsim

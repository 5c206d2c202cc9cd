#pragma once

#include <span>
#include <vector>

#include "pinc/net.hpp"
#include "pinc/physics.hpp"
#include "pinc/trajectory.hpp"

namespace pinc::forwardsim {

/// Normalized window time of sample j: (j / (M - 1)) * (T / t_ref).
double window_time(const ControlSchedule& schedule, const NormalizationRefs& norm, int j);

/// Cascaded inference: window k evaluates the transient network at
/// (x, t_j, u^(k-1), u^(k)) with no state carried between windows.
/// Rows follow the plant export order: window, then sample, then probe.
Trajectory pinc_forward(const net::NetworkModel& model, const physics::FluidSystem& sys,
                        const ControlSchedule& schedule, std::span<const double> positions);

/// Normalized outputs at one position: out[k][j] = (P~, V~) in window k (0-based).
std::vector<std::vector<Eigen::Vector2d>> window_outputs(const net::NetworkModel& model,
                                                          const ControlSchedule& schedule,
                                                          double x);

struct SeamGap {
  double P = 0.0;  // normalized
  double V = 0.0;
};

/// |y(k, M-1) - y(k+1, 0)| for every seam between consecutive windows.
std::vector<SeamGap> window_seam_gap(const net::NetworkModel& model,
                                     const ControlSchedule& schedule, double x);

}  // namespace pinc::forwardsim

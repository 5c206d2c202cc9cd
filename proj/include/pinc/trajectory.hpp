#pragma once

#include <string>
#include <vector>

namespace pinc {

/// Piecewise-constant control sequence. Window k (1-based) holds windows[k-1] after starting
/// from the steady state of the previous control (u0 for k = 1).
struct ControlSchedule {
  double u0 = 0.5;
  std::vector<double> windows;
  double window_seconds = 1.0;
  int steps_per_window = 21;  // M: output samples per window, both ends included

  void validate() const;
  double control_before(std::size_t k) const { return k == 0 ? u0 : windows[k - 1]; }
};

/// First non-empty line is u0, each further line one window control. '#' starts a comment.
ControlSchedule read_schedule(const std::string& path, double window_seconds, int steps_per_window);

/// One sample of the shared trajectory schema. rho and mdot are NaN for liquids.
struct TrajectoryRow {
  double t_seconds = 0.0;
  int window_index = 0;
  double u = 0.0;
  double probe_x = 0.0;  // normalized position
  double P_pa = 0.0;
  double V_ms = 0.0;
  double rho_kgm3 = 0.0;
  double mdot_kgs = 0.0;
};

struct Trajectory {
  bool has_gas_columns = false;
  std::vector<TrajectoryRow> rows;
};

void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

/// Splits comma-separated numbers; throws FormatError on junk.
std::vector<double> parse_number_list(const std::string& text);

}  // namespace pinc

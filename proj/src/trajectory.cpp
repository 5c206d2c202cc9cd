#include "pinc/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pinc/error.hpp"
#include "pinc/format.hpp"

namespace pinc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw FormatError("cannot parse " + what + " '" + t + "'");
  }
  if (used != t.size()) throw FormatError("cannot parse " + what + " '" + t + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void ControlSchedule::validate() const {
  if (!(u0 >= 0 && u0 <= 1)) throw ConfigError("schedule u0 must lie in [0, 1]");
  for (double u : windows) {
    if (!(u >= 0 && u <= 1)) throw ConfigError("schedule controls must lie in [0, 1]");
  }
  if (!(window_seconds > 0)) throw ConfigError("window length must be positive");
  if (steps_per_window < 2) throw ConfigError("steps per window must be >= 2");
}

ControlSchedule read_schedule(const std::string& path, double window_seconds,
                              int steps_per_window) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read schedule " + path);
  ControlSchedule s;
  s.window_seconds = window_seconds;
  s.steps_per_window = steps_per_window;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const double v = parse_double(line, "schedule control");
    if (first) {
      s.u0 = v;
      first = false;
    } else {
      s.windows.push_back(v);
    }
  }
  if (first) throw ConfigError("schedule file " + path + " is empty");
  s.validate();
  return s;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "t_seconds,window_index,u,probe_x,P_pa,V_ms";
  if (traj.has_gas_columns) out << ",rho_kgm3,mdot_kgs";
  out << '\n';
  for (const auto& r : traj.rows) {
    out << format_double(r.t_seconds) << ',' << r.window_index << ',' << format_double(r.u) << ','
        << format_double(r.probe_x) << ',' << format_double(r.P_pa) << ','
        << format_double(r.V_ms);
    if (traj.has_gas_columns) {
      out << ',' << format_double(r.rho_kgm3) << ',' << format_double(r.mdot_kgs);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + " is empty");
  const auto header = split(trim(line), ',');
  const std::vector<std::string> base = {"t_seconds", "window_index", "u", "probe_x", "P_pa", "V_ms"};
  Trajectory t;
  if (header.size() == 8 && header[6] == "rho_kgm3" && header[7] == "mdot_kgs") {
    t.has_gas_columns = true;
  } else if (header.size() != 6) {
    throw FormatError(path + ": unexpected trajectory columns");
  }
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (header[i] != base[i]) throw FormatError(path + ": unexpected column '" + header[i] + "'");
  }
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw FormatError(path + ": ragged row");
    TrajectoryRow r;
    r.t_seconds = parse_double(cells[0], "t_seconds");
    r.window_index = static_cast<int>(parse_double(cells[1], "window_index"));
    r.u = parse_double(cells[2], "u");
    r.probe_x = parse_double(cells[3], "probe_x");
    r.P_pa = parse_double(cells[4], "P_pa");
    r.V_ms = parse_double(cells[5], "V_ms");
    if (t.has_gas_columns) {
      r.rho_kgm3 = parse_double(cells[6], "rho_kgm3");
      r.mdot_kgs = parse_double(cells[7], "mdot_kgs");
    }
    t.rows.push_back(r);
  }
  return t;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& cell : split(text, ',')) {
    out.push_back(parse_double(cell, "number"));
  }
  return out;
}

}  // namespace pinc

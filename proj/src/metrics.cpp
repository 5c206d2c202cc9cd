#include "pinc/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>

#include "pinc/error.hpp"
#include "pinc/format.hpp"

namespace pinc::metrics {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || a.size() != b.size()) {
    throw DimensionError("metric series must be non-empty and of equal length");
  }
}

}  // namespace

double mape(std::span<const double> y_true, std::span<const double> y_est) {
  check_pair(y_true, y_est);
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 0.0) throw NumericalError("MAPE undefined for a zero true value");
    s += std::fabs(y_true[i] - y_est[i]) / std::fabs(y_true[i]);
  }
  return 100.0 * s / static_cast<double>(y_true.size());
}

double fit_compare(std::span<const double> y_true, std::span<const double> y_est) {
  check_pair(y_true, y_est);
  double mean = 0.0;
  for (double v : y_true) mean += v;
  mean /= static_cast<double>(y_true.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    num += (y_true[i] - y_est[i]) * (y_true[i] - y_est[i]);
    den += (y_true[i] - mean) * (y_true[i] - mean);
  }
  if (den == 0.0) throw NumericalError("Fit undefined for a constant true series");
  return (1.0 - std::sqrt(num) / std::sqrt(den)) * 100.0;
}

double median_seconds(const std::function<void()>& fn, int repetitions) {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  std::vector<double> t;
  for (int r = 0; r < repetitions; ++r) {
    const auto a = std::chrono::steady_clock::now();
    fn();
    const auto b = std::chrono::steady_clock::now();
    t.push_back(std::chrono::duration<double>(b - a).count());
  }
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

double speed_ratio(const std::function<void()>& model_run, const std::function<void()>& plant_run,
                   int repetitions) {
  if (repetitions < 5) throw ConfigError("speed ratio needs at least 5 repetitions");
  const double m = median_seconds(model_run, repetitions);
  const double p = median_seconds(plant_run, repetitions);
  return p / std::max(m, 1e-12);
}

std::vector<MetricRow> compare_trajectories(const Trajectory& truth, const Trajectory& estimate) {
  if (truth.rows.size() != estimate.rows.size() || truth.rows.empty()) {
    throw FormatError("trajectory row counts differ");
  }
  for (std::size_t i = 0; i < truth.rows.size(); ++i) {
    const auto& a = truth.rows[i];
    const auto& b = estimate.rows[i];
    if (a.window_index != b.window_index || std::fabs(a.probe_x - b.probe_x) > 1e-12 ||
        std::fabs(a.t_seconds - b.t_seconds) > 1e-9 * std::max(1.0, std::fabs(a.t_seconds))) {
      throw FormatError("trajectory rows are misaligned at row " + std::to_string(i + 2));
    }
  }
  const bool gas = truth.has_gas_columns && estimate.has_gas_columns;
  std::vector<std::string> vars = {"P", "V"};
  if (gas) {
    vars.push_back("rho");
    vars.push_back("mdot");
  }
  auto pick = [](const TrajectoryRow& r, const std::string& v) {
    if (v == "P") return r.P_pa;
    if (v == "V") return r.V_ms;
    if (v == "rho") return r.rho_kgm3;
    return r.mdot_kgs;
  };
  std::map<double, std::vector<std::size_t>> by_probe;
  for (std::size_t i = 0; i < truth.rows.size(); ++i) by_probe[truth.rows[i].probe_x].push_back(i);

  std::vector<MetricRow> out;
  for (const auto& v : vars) {
    std::vector<double> all_t, all_e;
    double fit_sum = 0.0;
    int fit_n = 0;
    bool fit_ok = true;
    for (const auto& [x, idx] : by_probe) {
      std::vector<double> yt, ye;
      for (std::size_t i : idx) {
        yt.push_back(pick(truth.rows[i], v));
        ye.push_back(pick(estimate.rows[i], v));
      }
      all_t.insert(all_t.end(), yt.begin(), yt.end());
      all_e.insert(all_e.end(), ye.begin(), ye.end());
      const std::string label = "x=" + format_double(x);
      try {
        out.push_back({"mape", v, label, mape(yt, ye)});
      } catch (const NumericalError&) {
      }
      try {
        const double f = fit_compare(yt, ye);
        out.push_back({"fit", v, label, f});
        fit_sum += f;
        ++fit_n;
      } catch (const NumericalError&) {
        fit_ok = false;
      }
    }
    try {
      out.push_back({"mape", v, "all", mape(all_t, all_e)});
    } catch (const NumericalError&) {
    }
    if (fit_n > 0 && fit_ok) out.push_back({"fit", v, "probe_mean", fit_sum / fit_n});
  }
  return out;
}

void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "metric,variable,regime,value_percent\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.variable << ',' << r.regime << ',' << format_double(r.value_percent)
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace pinc::metrics

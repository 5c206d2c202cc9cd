#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pinc/trajectory.hpp"

namespace pinc::metrics {

/// Mean absolute percentage error. Throws NumericalError on a zero true value.
double mape(std::span<const double> y_true, std::span<const double> y_est);

/// (1 - |y_true - y_est| / |y_true - mean(y_true)|) * 100. Throws on a constant true series.
double fit_compare(std::span<const double> y_true, std::span<const double> y_est);

/// Median wall-clock time of plant_run over median time of model_run.
double speed_ratio(const std::function<void()>& model_run, const std::function<void()>& plant_run,
                   int repetitions = 5);

/// Median wall-clock seconds of fn over the given repetitions.
double median_seconds(const std::function<void()>& fn, int repetitions);

struct MetricRow {
  std::string metric;    // mape or fit
  std::string variable;  // P, V, rho, mdot
  std::string regime;    // probe label or aggregate name
  double value_percent = 0.0;
};

/// Per-variable, per-probe MAPE and Fit plus probe-mean aggregates. Rows must match in
/// count, time, window and probe position.
std::vector<MetricRow> compare_trajectories(const Trajectory& truth, const Trajectory& estimate);

void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path);

}  // namespace pinc::metrics

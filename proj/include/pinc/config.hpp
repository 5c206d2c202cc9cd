#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pinc/mpc.hpp"
#include "pinc/net.hpp"
#include "pinc/physics.hpp"
#include "pinc/plant.hpp"
#include "pinc/training.hpp"

namespace pinc::config {

struct RunSection {
  std::string output_dir = ".";
  double window_seconds = 0.0;  // 0 means t_ref
  int steps_per_window = 21;
  std::vector<double> probes{0.1};
  std::vector<std::uint64_t> seeds;  // more than one entry trains a seed sweep
  std::vector<double> eval_controls{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int eval_positions = 21;
};

struct MpcRun {
  mpc::MpcConfig controller;
  double u0 = 0.9;
  double duration = 30.0;            // s
  mpc::BoundSchedule y_min_schedule;  // overrides controller.y_min from each start time
};

struct RunConfig {
  std::string preset;  // empty when built from scratch
  physics::FluidSystem system;
  NormalizationRefs norm;
  net::Architecture steady_arch;
  net::Architecture transient_arch;
  training::TrainingConfig steady_training;
  training::TrainingConfig transient_training;
  plant::PlantOptions plant;
  double plant_dt = 0.1;  // s
  MpcRun mpc;
  RunSection run;

  void validate() const;
  double window_seconds() const { return run.window_seconds > 0 ? run.window_seconds : norm.t_ref; }
};

/// "table1-incompressible" or "table2-compressible"; throws ConfigError otherwise.
RunConfig preset(const std::string& name);

/// INI text with sections system, normalization, network, training, plant, mpc and run.
/// A [network] preset key seeds every value before the remaining keys apply.
/// Unknown sections or keys raise ConfigError.
RunConfig parse(const std::string& text);
RunConfig load(const std::string& path);

/// Canonical text listing every key; parse(serialize(c)) == c.
std::string serialize(const RunConfig& cfg);
void save(const RunConfig& cfg, const std::string& path);

bool equivalent(const RunConfig& a, const RunConfig& b);

}  // namespace pinc::config

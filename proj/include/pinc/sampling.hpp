#pragma once

#include <Eigen/Dense>

#include <cstdint>

#include "pinc/physics.hpp"

namespace pinc::sampling {

enum class Role { pde, bc_up, bc_down, ic, validation };

/// Points are stored column-wise: points.col(i) is the i-th d-dimensional sample.
struct SampleBatch {
  Role role = Role::pde;
  int d = 1;
  std::uint64_t seed = 0;
  Eigen::MatrixXd points;

  Eigen::Index size() const { return points.cols(); }
};

/// Latin hypercube in [0,1)^d.
///
/// Generator: mt19937_64 seeded with `seed`. For each dimension in order, a Fisher-Yates
/// shuffle of 0..n-1 (swap index drawn by unbiased multiply-shift rejection) assigns strata;
/// then for each dimension in order and each point in order, an offset u = (draw >> 11) * 2^-53
/// places the sample at (stratum + u) / n.
Eigen::MatrixXd lhs(int n, int d, std::uint64_t seed);

/// Seed of the batch for `role` derived from a base seed via splitmix64.
std::uint64_t derive_seed(std::uint64_t base, Role role);

struct TrainingSizes {
  int n_f = 1000;
  int n_b = 200;
  int n_i = 0;
};

struct TrainingSets {
  SampleBatch pde;
  SampleBatch bc_up;
  SampleBatch bc_down;
  SampleBatch ic;  // empty for the steady regime
};

/// Steady: pde over (x, u); boundaries over u alone. Transient: pde over (x, t, u0, u);
/// boundaries over (t, u0, u); ic over (x, u0, u). The upstream boundary takes the odd point.
TrainingSets build_training_sets(physics::Regime regime, const TrainingSizes& sizes,
                                 std::uint64_t seed);

/// Full network inputs (input_dim x n) for a batch, inserting pinned coordinates
/// (x = 0 or 1 on boundaries, t = 0 on the initial condition).
Eigen::MatrixXd network_inputs(const SampleBatch& batch, physics::Regime regime);

}  // namespace pinc::sampling

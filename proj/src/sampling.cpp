#include "pinc/sampling.hpp"

#include <numeric>
#include <random>
#include <vector>

namespace pinc::sampling {

namespace {

// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
std::uint64_t below(std::mt19937_64& gen, std::uint64_t bound) {
  unsigned __int128 m = static_cast<unsigned __int128>(gen()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(gen()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

SampleBatch make(Role role, int n, int d, std::uint64_t base) {
  SampleBatch b;
  b.role = role;
  b.d = d;
  b.seed = derive_seed(base, role);
  b.points = lhs(n, d, b.seed);
  return b;
}

}  // namespace

Eigen::MatrixXd lhs(int n, int d, std::uint64_t seed) {
  Eigen::MatrixXd pts(d, n);
  if (n <= 0 || d <= 0) return pts;
  std::mt19937_64 gen(seed);
  std::vector<std::vector<int>> strata(d, std::vector<int>(n));
  for (int j = 0; j < d; ++j) {
    auto& perm = strata[j];
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const auto r = static_cast<int>(below(gen, static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[i], perm[r]);
    }
  }
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      pts(j, i) = (strata[j][i] + u) / n;
    }
  }
  return pts;
}

std::uint64_t derive_seed(std::uint64_t base, Role role) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(role) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

TrainingSets build_training_sets(physics::Regime regime, const TrainingSizes& sizes,
                                 std::uint64_t seed) {
  const bool steady = regime == physics::Regime::steady;
  const int up = (sizes.n_b + 1) / 2;
  const int down = sizes.n_b / 2;
  TrainingSets s;
  s.pde = make(Role::pde, sizes.n_f, steady ? 2 : 4, seed);
  s.bc_up = make(Role::bc_up, up, steady ? 1 : 3, seed);
  s.bc_down = make(Role::bc_down, down, steady ? 1 : 3, seed);
  if (!steady) s.ic = make(Role::ic, sizes.n_i, 3, seed);
  else s.ic = SampleBatch{Role::ic, 3, 0, Eigen::MatrixXd(3, 0)};
  return s;
}

Eigen::MatrixXd network_inputs(const SampleBatch& batch, physics::Regime regime) {
  const Eigen::Index n = batch.size();
  const bool steady = regime == physics::Regime::steady;
  const int dim = steady ? 2 : 4;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(dim, n);
  switch (batch.role) {
    case Role::pde:
    case Role::validation:
      x = batch.points;
      break;
    case Role::bc_up:
    case Role::bc_down: {
      const double pin = batch.role == Role::bc_up ? 0.0 : 1.0;
      x.row(0).setConstant(pin);
      x.bottomRows(dim - 1) = batch.points;
      break;
    }
    case Role::ic:
      x.row(0) = batch.points.row(0);
      x.row(1).setZero();
      x.bottomRows(2) = batch.points.bottomRows(2);
      break;
  }
  return x;
}

}  // namespace pinc::sampling

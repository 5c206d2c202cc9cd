#include <doctest.h>

#include <algorithm>
#include <vector>

#include "pinc/sampling.hpp"

using namespace pinc;
using namespace pinc::sampling;
using physics::Regime;

TEST_SUITE("sampling") {

TEST_CASE("latin hypercube is stratified in every dimension") {
  for (int n : {1, 7, 100, 1000}) {
    for (int d : {1, 2, 4}) {
      const Eigen::MatrixXd pts = lhs(n, d, 99);
      REQUIRE(pts.rows() == d);
      REQUIRE(pts.cols() == n);
      for (int j = 0; j < d; ++j) {
        std::vector<int> hits(static_cast<std::size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
          const double v = pts(j, i);
          REQUIRE(v >= 0.0);
          REQUIRE(v < 1.0);
          ++hits[static_cast<std::size_t>(v * n)];
        }
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
      }
    }
  }
}

TEST_CASE("latin hypercube is reproducible per seed") {
  CHECK(lhs(50, 3, 4) == lhs(50, 3, 4));
  CHECK(lhs(50, 3, 4) != lhs(50, 3, 5));
  CHECK(lhs(0, 2, 1).cols() == 0);
}

TEST_CASE("derived seeds differ by role") {
  std::vector<std::uint64_t> s;
  for (Role r : {Role::pde, Role::bc_up, Role::bc_down, Role::ic, Role::validation}) s.push_back(derive_seed(7, r));
  std::sort(s.begin(), s.end());
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  CHECK(derive_seed(7, Role::pde) == derive_seed(7, Role::pde));
  CHECK(derive_seed(7, Role::pde) != derive_seed(8, Role::pde));
}

TEST_CASE("steady training sets") {
  const TrainingSets s = build_training_sets(Regime::steady, {1000, 201, 0}, 3);
  CHECK(s.pde.size() == 1000);
  CHECK(s.pde.d == 2);
  CHECK(s.bc_up.size() == 101);
  CHECK(s.bc_down.size() == 100);
  CHECK(s.bc_up.d == 1);
  CHECK(s.ic.size() == 0);

  const Eigen::MatrixXd up = network_inputs(s.bc_up, Regime::steady);
  const Eigen::MatrixXd down = network_inputs(s.bc_down, Regime::steady);
  REQUIRE(up.rows() == 2);
  CHECK(up.row(0).isZero(0.0));
  CHECK((down.row(0).array() == 1.0).all());
  CHECK(up.row(1) == s.bc_up.points.row(0));
  CHECK(network_inputs(s.pde, Regime::steady) == s.pde.points);
}

TEST_CASE("transient training sets pin x on boundaries and t on the initial condition") {
  const TrainingSets s = build_training_sets(Regime::transient, {500, 100, 80}, 3);
  CHECK(s.pde.d == 4);
  CHECK(s.bc_up.d == 3);
  CHECK(s.ic.d == 3);
  CHECK(s.ic.size() == 80);
  CHECK(s.bc_up.size() + s.bc_down.size() == 100);

  const Eigen::MatrixXd ic = network_inputs(s.ic, Regime::transient);
  REQUIRE(ic.rows() == 4);
  CHECK(ic.row(1).isZero(0.0));
  CHECK(ic.row(0) == s.ic.points.row(0));
  CHECK(ic.row(3) == s.ic.points.row(2));

  const Eigen::MatrixXd down = network_inputs(s.bc_down, Regime::transient);
  CHECK((down.row(0).array() == 1.0).all());
  CHECK(down.row(1) == s.bc_down.points.row(0));
}

TEST_CASE("training sets are reproducible and seed sensitive") {
  const TrainingSets a = build_training_sets(Regime::transient, {64, 16, 16}, 11);
  const TrainingSets b = build_training_sets(Regime::transient, {64, 16, 16}, 11);
  const TrainingSets c = build_training_sets(Regime::transient, {64, 16, 16}, 12);
  CHECK(a.pde.points == b.pde.points);
  CHECK(a.ic.points == b.ic.points);
  CHECK(a.pde.points != c.pde.points);
}

}  // TEST_SUITE

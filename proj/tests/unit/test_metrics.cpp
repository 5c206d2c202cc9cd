#include <doctest.h>

#include <cmath>
#include <random>
#include <thread>

#include "pinc/error.hpp"
#include "pinc/metrics.hpp"

using namespace pinc;
using namespace pinc::metrics;

TEST_SUITE("metrics") {

TEST_CASE("worked example") {
  const std::vector<double> yt{1, 2, 4, 3, 5};
  const std::vector<double> ye{1.1, 1.9, 3.7, 3.2, 4.6};
  CHECK(mape(yt, ye) == doctest::Approx(7.433333333333338).epsilon(1e-14));
  CHECK(fit_compare(yt, ye) == doctest::Approx(82.39318313834099).epsilon(1e-14));
}

TEST_CASE("formulas recomputed on random series") {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> unif(0.5, 2.0), noise(-0.2, 0.2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> yt(37), ye(37);
    for (std::size_t i = 0; i < yt.size(); ++i) {
      yt[i] = unif(gen);
      ye[i] = yt[i] + noise(gen);
    }
    double m = 0.0, mean = 0.0, num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < yt.size(); ++i) {
      m += std::fabs((yt[i] - ye[i]) / yt[i]);
      mean += yt[i];
    }
    m = 100.0 * m / 37.0;
    mean /= 37.0;
    for (std::size_t i = 0; i < yt.size(); ++i) {
      num += (yt[i] - ye[i]) * (yt[i] - ye[i]);
      den += (yt[i] - mean) * (yt[i] - mean);
    }
    CHECK(mape(yt, ye) == doctest::Approx(m).epsilon(1e-12));
    const double fit = fit_compare(yt, ye);
    CHECK(fit == doctest::Approx(100.0 * (1.0 - std::sqrt(num / den))).epsilon(1e-12));
    CHECK(fit <= 100.0);
  }
}

TEST_CASE("perfect estimates and degenerate inputs") {
  const std::vector<double> y{3, 1, 2};
  CHECK(mape(y, y) == 0.0);
  CHECK(fit_compare(y, y) == 100.0);
  const std::vector<double> mean_only{2, 2, 2};
  CHECK(fit_compare(y, mean_only) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(mape(std::vector<double>{0, 1}, std::vector<double>{0, 1}), NumericalError);
  CHECK_THROWS_AS(fit_compare(mean_only, y), NumericalError);
  CHECK_THROWS_AS(mape(y, std::vector<double>{1, 2}), DimensionError);
  CHECK_THROWS_AS(fit_compare(std::vector<double>{}, std::vector<double>{}), DimensionError);
}

TEST_CASE("speed ratio compares median timings") {
  auto fast = [] {};
  auto slow = [] { std::this_thread::sleep_for(std::chrono::milliseconds(20)); };
  CHECK(speed_ratio(fast, slow) > 10.0);
  CHECK(speed_ratio(slow, fast) < 0.1);
  CHECK(median_seconds(slow, 3) >= 0.02);
  CHECK_THROWS_AS(speed_ratio(fast, slow, 4), ConfigError);
}

TEST_CASE("trajectory comparison reports per-probe and aggregate rows") {
  Trajectory a, b;
  a.has_gas_columns = b.has_gas_columns = true;
  for (int j = 0; j < 4; ++j) {
    for (double x : {0.1, 0.5}) {
      TrajectoryRow r{static_cast<double>(j), 1, 0.5, x, 1e5 + 100.0 * j * (1 + x), 1.0 + 0.1 * j, 50.0 + j, 40.0 - j};
      a.rows.push_back(r);
      r.P_pa *= 1.01;
      b.rows.push_back(r);
    }
  }
  const auto rows = compare_trajectories(a, b);
  auto find = [&](const std::string& m, const std::string& v, const std::string& g) {
    for (const auto& r : rows) {
      if (r.metric == m && r.variable == v && r.regime == g) return r.value_percent;
    }
    FAIL("missing row " << m << ' ' << v << ' ' << g);
    return 0.0;
  };
  CHECK(find("mape", "P", "x=0.10000000000000001") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(find("mape", "P", "all") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(find("mape", "V", "all") == 0.0);
  CHECK(find("fit", "rho", "probe_mean") == 100.0);
  CHECK(find("mape", "mdot", "x=0.5") == 0.0);

  Trajectory shifted = b;
  shifted.rows[3].t_seconds += 0.5;
  CHECK_THROWS_AS(compare_trajectories(a, shifted), FormatError);
  Trajectory shorter = b;
  shorter.rows.pop_back();
  CHECK_THROWS_AS(compare_trajectories(a, shorter), FormatError);
}

}  // TEST_SUITE

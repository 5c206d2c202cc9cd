#include <doctest.h>

#include <cmath>
#include <random>

#include "pinc/error.hpp"
#include "pinc/net.hpp"

using namespace pinc;
using namespace pinc::net;

namespace {

// Deterministic, init-independent parameters shared with tests/oracles/oracles.py.
ParameterVector pattern(std::size_t n) {
  ParameterVector p(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) p[static_cast<Eigen::Index>(i)] = 0.5 * std::sin(0.37 * i + 0.1);
  return p;
}

// Floor keeps near-zero derivatives from inflating the ratio with finite-difference noise.
double rel_err(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-4}); }

Architecture plain_arch(Activation a, int in = 2) { return {in, 2, 3, 7, a, false}; }
Architecture skip_arch(Activation a, int in = 4) { return {in, 2, 3, 7, a, true}; }

const Activation kActs[] = {Activation::tanh, Activation::sinusoidal, Activation::swish};

}  // namespace

TEST_SUITE("net") {

TEST_CASE("init_params is deterministic per seed and differs across seeds") {
  const Architecture a = plain_arch(Activation::tanh);
  CHECK(init_params(a, 7) == init_params(a, 7));
  CHECK(init_params(a, 7) != init_params(a, 8));
}

TEST_CASE("init_params: zero biases, unit sine weight, Glorot bound") {
  for (bool skip : {false, true}) {
    Architecture a{4, 2, 3, 5, Activation::sinusoidal, skip};
    const ParameterLayout layout(a);
    const ParameterVector p = init_params(a, 11);
    REQUIRE(static_cast<std::size_t>(p.size()) == layout.size());
    for (const Block& b : layout.blocks()) {
      const auto seg = p.segment(static_cast<Eigen::Index>(b.offset), b.rows * b.cols);
      switch (b.role) {
        case Role::bias: CHECK(seg.isZero(0.0)); break;
        case Role::act_sin: CHECK(seg[0] == 1.0); break;
        case Role::act_cos: CHECK(seg[0] == 0.0); break;
        case Role::weight: {
          const double bound = std::sqrt(6.0 / (b.rows + b.cols));
          CHECK(seg.cwiseAbs().maxCoeff() <= bound);
          CHECK(seg.cwiseAbs().maxCoeff() > 0.0);
        }
      }
    }
  }
  const Architecture tiny{2, 2, 1, 1, Activation::tanh, false};
  const ParameterLayout layout(tiny);
  const ParameterVector p = init_params(tiny, 3);
  CHECK(p[static_cast<Eigen::Index>(layout.index(0, Role::bias))] == 0.0);
  CHECK(p[static_cast<Eigen::Index>(layout.index(1, Role::bias, 0))] == 0.0);
  CHECK(p[static_cast<Eigen::Index>(layout.index(1, Role::bias, 1))] == 0.0);
}

TEST_CASE("layout: weights row-major, weight before bias, activation pairs last") {
  const Architecture a{2, 2, 2, 3, Activation::sinusoidal, false};
  const ParameterLayout l(a);
  CHECK(l.index(0, Role::weight, 0, 0) == 0);
  CHECK(l.index(0, Role::weight, 0, 1) == 1);
  CHECK(l.index(0, Role::weight, 1, 0) == 2);
  CHECK(l.index(0, Role::bias, 0) == 6);
  CHECK(l.index(1, Role::weight, 0, 0) == 9);
  CHECK(l.output_layer() == 2);
  CHECK(l.index(2, Role::bias, 1) == 9 + 9 + 3 + 6 + 1);
  CHECK(l.index(0, Role::act_sin) == 29);
  CHECK(l.index(1, Role::act_cos) == 32);
  CHECK(l.size() == 33);
}

TEST_CASE("zero network outputs zero; output bias passes through") {
  for (bool skip : {false, true}) {
    Architecture a{skip ? 4 : 2, 2, 3, 5, Activation::tanh, skip};
    const ParameterLayout l(a);
    ParameterVector p = ParameterVector::Zero(static_cast<Eigen::Index>(l.size()));
    std::vector<double> x(static_cast<std::size_t>(a.input_dim), 0.3);
    CHECK(forward(a, p, x).isZero(0.0));
    p[static_cast<Eigen::Index>(l.index(l.output_layer(), Role::bias, 0))] = 0.3;
    p[static_cast<Eigen::Index>(l.index(l.output_layer(), Role::bias, 1))] = 0.7;
    const Eigen::VectorXd y = forward(a, p, x);
    CHECK(y[0] == 0.3);
    CHECK(y[1] == 0.7);
  }
}

TEST_CASE("plain network matches the straight-line reference evaluation") {
  struct Case {
    Activation act;
    double y0, y1;
  };
  const Case cases[] = {{Activation::tanh, 0.47006747466700105, 0.213957127690114},
                        {Activation::sinusoidal, 0.797775869418275, 0.30392953796233835},
                        {Activation::swish, 0.43095197507086525, 0.3600189386963891}};
  for (const auto& c : cases) {
    const Architecture a{2, 2, 2, 5, c.act, false};
    const ParameterVector p = pattern(ParameterLayout(a).size());
    const double x[2] = {0.5, 0.5};
    const Eigen::VectorXd y = forward_plain(a, p, x);
    CHECK(y[0] == doctest::Approx(c.y0).epsilon(1e-13));
    CHECK(y[1] == doctest::Approx(c.y1).epsilon(1e-13));
  }
}

TEST_CASE("skip network matches the straight-line reference evaluation") {
  struct Case {
    Activation act;
    double y0, y1;
  };
  const Case cases[] = {{Activation::tanh, 0.2965183230659276, 0.0582169099446095},
                        {Activation::sinusoidal, 0.2178480267698425, -0.44158829651287707},
                        {Activation::swish, 0.34667658217004493, -0.18737400000126053}};
  for (const auto& c : cases) {
    const Architecture a{4, 2, 3, 6, c.act, true};
    const ParameterVector p = pattern(ParameterLayout(a).size());
    const double x[4] = {0.2, 0.8, 0.5, 0.5};
    const Eigen::VectorXd y = forward_skip(a, p, x);
    CHECK(y[0] == doctest::Approx(c.y0).epsilon(1e-13));
    CHECK(y[1] == doctest::Approx(c.y1).epsilon(1e-13));
  }
}

TEST_CASE("skip network collapses to the encoder when U = V") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Activation act : kActs) {
    const Architecture a = skip_arch(act);
    const ParameterLayout l(a);
    for (int trial = 0; trial < 5; ++trial) {
      ParameterVector p = init_params(a, 100 + trial);
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.1 * unif(gen);
      const Block& u = l.block(0, Role::weight);
      const Block& v = l.block(1, Role::weight);
      // Copy the U encoder (weight, bias and its activation pair) into the V encoder.
      p.segment(static_cast<Eigen::Index>(v.offset), v.rows * (v.cols + 1)) =
          p.segment(static_cast<Eigen::Index>(u.offset), u.rows * (u.cols + 1));
      if (act == Activation::sinusoidal) {
        p[static_cast<Eigen::Index>(l.index(1, Role::act_sin))] = p[static_cast<Eigen::Index>(l.index(0, Role::act_sin))];
        p[static_cast<Eigen::Index>(l.index(1, Role::act_cos))] = p[static_cast<Eigen::Index>(l.index(0, Role::act_cos))];
      }
      const double x[4] = {0.1, 0.9, 0.3, 0.6};
      // Reference: W_out U + b_out with U from a one-layer plain net sharing the encoder.
      const Architecture enc{4, a.hidden_size, 1, a.hidden_size, act, false};
      const ParameterLayout le(enc);
      ParameterVector pe = ParameterVector::Zero(static_cast<Eigen::Index>(le.size()));
      pe.segment(0, u.rows * (u.cols + 1)) = p.segment(static_cast<Eigen::Index>(u.offset), u.rows * (u.cols + 1));
      for (int r = 0; r < a.hidden_size; ++r) {
        pe[static_cast<Eigen::Index>(le.index(1, Role::weight, r, r))] = 1.0;
      }
      if (act == Activation::sinusoidal) {
        pe[static_cast<Eigen::Index>(le.index(0, Role::act_sin))] = p[static_cast<Eigen::Index>(l.index(0, Role::act_sin))];
        pe[static_cast<Eigen::Index>(le.index(0, Role::act_cos))] = p[static_cast<Eigen::Index>(l.index(0, Role::act_cos))];
      }
      const Eigen::VectorXd U = forward_plain(enc, pe, x);
      const Block& wo = l.block(l.output_layer(), Role::weight);
      const Block& bo = l.block(l.output_layer(), Role::bias);
      const Eigen::MatrixXd Wout = Eigen::Map<const Eigen::Matrix<double, -1, -1, Eigen::RowMajor>>(
          p.data() + wo.offset, wo.rows, wo.cols);
      const Eigen::VectorXd expect = Wout * U + p.segment(static_cast<Eigen::Index>(bo.offset), bo.rows);
      const Eigen::VectorXd y = forward_skip(a, p, x);
      CHECK((y - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("zero gates leave every A equal to U") {
  const Architecture a{4, 2, 3, 5, Activation::tanh, true};
  const ParameterLayout l(a);
  ParameterVector p = init_params(a, 9);
  for (int layer = 2; layer <= a.n_layers + 1; ++layer) {
    for (Role r : {Role::weight, Role::bias}) {
      const Block& b = l.block(layer, r);
      p.segment(static_cast<Eigen::Index>(b.offset), b.rows * b.cols).setZero();
    }
  }
  // Changing the V encoder must then have no effect.
  ParameterVector q = p;
  const Block& v = l.block(1, Role::weight);
  q.segment(static_cast<Eigen::Index>(v.offset), v.rows * v.cols).setConstant(0.9);
  const double x[4] = {0.3, 0.2, 0.7, 0.4};
  CHECK(forward_skip(a, p, x) == forward_skip(a, q, x));
}

TEST_CASE("dimension mismatches are rejected") {
  const Architecture a = plain_arch(Activation::tanh);
  const ParameterVector p = init_params(a, 1);
  const double x3[3] = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(forward(a, p, x3), DimensionError);
  const double x2[2] = {0.1, 0.2};
  CHECK_THROWS_AS(forward(a, ParameterVector::Zero(3), x2), DimensionError);
  CHECK_THROWS_AS(forward_skip(a, p, x2), ConfigError);
}

TEST_CASE("input jacobian matches central differences on random cases") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (bool skip : {false, true}) {
    for (Activation act : kActs) {
      const Architecture a = skip ? skip_arch(act) : plain_arch(act, 4);
      double worst = 0.0;
      for (int trial = 0; trial < 100; ++trial) {
        ParameterVector p = init_params(a, static_cast<std::uint64_t>(trial));
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.2 * (unif(gen) - 0.5);
        std::vector<double> x(4);
        for (double& v : x) v = unif(gen);
        const EvalResult r = eval_with_input_derivatives(a, p, x);
        REQUIRE(r.input_jacobian.rows() == 2);
        REQUIRE(r.input_jacobian.cols() == 4);
        CHECK(r.output == forward(a, p, x));
        for (int i = 0; i < 4; ++i) {
          auto xp = x, xm = x;
          xp[static_cast<std::size_t>(i)] += 1e-6;
          xm[static_cast<std::size_t>(i)] -= 1e-6;
          const Eigen::VectorXd fd = (forward(a, p, xp) - forward(a, p, xm)) / 2e-6;
          for (int o = 0; o < 2; ++o) worst = std::max(worst, rel_err(r.input_jacobian(o, i), fd[o]));
        }
      }
      INFO("skip=" << skip << " act=" << to_string(act));
      CHECK(worst <= 1e-5);
    }
  }
}

TEST_CASE("input jacobian edge cases") {
  const Architecture a = plain_arch(Activation::tanh);
  const ParameterVector zero = ParameterVector::Zero(static_cast<Eigen::Index>(ParameterLayout(a).size()));
  const double x[2] = {0.4, 0.6};
  CHECK(eval_with_input_derivatives(a, zero, x).input_jacobian.isZero(0.0));

  // One hidden unit, cos activation at zero preactivation: cos'(0) = 0 kills the jacobian.
  const Architecture s{2, 2, 1, 1, Activation::sinusoidal, false};
  const ParameterLayout l(s);
  ParameterVector p = ParameterVector::Zero(static_cast<Eigen::Index>(l.size()));
  p[static_cast<Eigen::Index>(l.index(0, Role::weight, 0, 0))] = 1.0;
  p[static_cast<Eigen::Index>(l.index(0, Role::weight, 0, 1))] = -1.0;
  p[static_cast<Eigen::Index>(l.index(1, Role::weight, 0, 0))] = 2.0;
  p[static_cast<Eigen::Index>(l.index(1, Role::weight, 1, 0))] = -3.0;
  p[static_cast<Eigen::Index>(l.index(0, Role::act_sin))] = 0.0;
  p[static_cast<Eigen::Index>(l.index(0, Role::act_cos))] = 1.0;
  const double x0[2] = {0.5, 0.5};
  const EvalResult r = eval_with_input_derivatives(s, p, x0);
  CHECK(r.input_jacobian.isZero(1e-15));
  CHECK(r.output[0] == doctest::Approx(2.0));
}

namespace {

// J = sum over points and outputs of 0.5 v^2 + 0.3 v t0 + 0.2 t1^2, using the jets of dirs {0, 1}.
double mixed_objective(const JetBatch& jet, std::size_t, JetBatch& adj) {
  const auto v = jet.value.array();
  const auto t0 = jet.tangent[0].array();
  const auto t1 = jet.tangent[1].array();
  adj.value = (v + 0.3 * t0).matrix();
  adj.tangent[0] = (0.3 * v).matrix();
  adj.tangent[1] = (0.4 * t1).matrix();
  return (0.5 * v.square() + 0.3 * v * t0 + 0.2 * t1.square()).sum();
}

}  // namespace

TEST_CASE("objective gradient: constant objective gives zero") {
  const Architecture a = plain_arch(Activation::tanh);
  const ParameterVector p = init_params(a, 1);
  const Eigen::MatrixXd in = Eigen::MatrixXd::Constant(2, 5, 0.4);
  Eigen::VectorXd g;
  const double v = objective_gradient(
      a, p, in, {}, [](const JetBatch&, std::size_t, JetBatch&) { return 3.0; }, g);
  CHECK(v == 3.0);
  CHECK(g.isZero(0.0));
}

TEST_CASE("objective gradient: half squared output gives output as bias gradient") {
  const Architecture a = plain_arch(Activation::swish);
  const ParameterLayout l(a);
  const ParameterVector p = init_params(a, 4);
  Eigen::MatrixXd in(2, 1);
  in << 0.3, 0.8;
  Eigen::VectorXd g;
  objective_gradient(
      a, p, in, {},
      [](const JetBatch& jet, std::size_t, JetBatch& adj) {
        adj.value = jet.value;
        return 0.5 * jet.value.squaredNorm();
      },
      g);
  const double x[2] = {0.3, 0.8};
  const Eigen::VectorXd y = forward(a, p, x);
  CHECK(g[static_cast<Eigen::Index>(l.index(l.output_layer(), Role::bias, 0))] == doctest::Approx(y[0]).epsilon(1e-14));
  CHECK(g[static_cast<Eigen::Index>(l.index(l.output_layer(), Role::bias, 1))] == doctest::Approx(y[1]).epsilon(1e-14));
}

TEST_CASE("parameter gradient through input derivatives matches central differences") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int dirs[2] = {0, 1};
  for (bool skip : {false, true}) {
    for (Activation act : kActs) {
      const Architecture a = skip ? skip_arch(act) : plain_arch(act, 4);
      ParameterVector p = init_params(a, 77);
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.2 * (unif(gen) - 0.5);
      Eigen::MatrixXd in(4, 9);
      for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = unif(gen);
      Eigen::VectorXd g;
      objective_gradient(a, p, in, dirs, mixed_objective, g);
      auto value = [&](const ParameterVector& q) {
        Eigen::VectorXd dummy;
        return objective_gradient(a, q, in, dirs, mixed_objective, dummy);
      };
      double worst = 0.0;
      std::uniform_int_distribution<Eigen::Index> pick(0, p.size() - 1);
      for (int k = 0; k < 25; ++k) {
        const Eigen::Index i = pick(gen);
        ParameterVector pp = p, pm = p;
        pp[i] += 1e-6;
        pm[i] -= 1e-6;
        worst = std::max(worst, rel_err(g[i], (value(pp) - value(pm)) / 2e-6));
      }
      INFO("skip=" << skip << " act=" << to_string(act));
      CHECK(worst <= 1e-5);
    }
  }
}

TEST_CASE("gradient and jets are bitwise independent of the thread count") {
  const Architecture a = skip_arch(Activation::swish);
  const ParameterVector p = init_params(a, 5);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd in(4, 1000);
  for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = unif(gen);
  const int dirs[2] = {0, 1};
  Eigen::VectorXd g1, g3;
  const double v1 = objective_gradient(a, p, in, dirs, mixed_objective, g1, {256, 1});
  const double v3 = objective_gradient(a, p, in, dirs, mixed_objective, g3, {256, 3});
  CHECK(v1 == v3);
  CHECK(g1 == g3);
  const JetBatch j1 = evaluate_batch(a, p, in, dirs, {256, 1});
  const JetBatch j3 = evaluate_batch(a, p, in, dirs, {256, 3});
  CHECK(j1.value == j3.value);
  CHECK(j1.tangent[1] == j3.tangent[1]);
}

TEST_CASE("batched evaluation equals pointwise evaluation") {
  const Architecture a = plain_arch(Activation::sinusoidal, 4);
  const ParameterVector p = init_params(a, 12);
  Eigen::MatrixXd in(4, 300);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = unif(gen);
  const int dirs[1] = {2};
  const JetBatch jet = evaluate_batch(a, p, in, dirs);
  for (Eigen::Index c = 0; c < in.cols(); c += 37) {
    const std::vector<double> x(in.col(c).data(), in.col(c).data() + 4);
    const EvalResult r = eval_with_input_derivatives(a, p, x);
    CHECK((jet.value.col(c) - r.output).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((jet.tangent[0].col(c) - r.input_jacobian.col(2)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("model document round trip is lossless and canonical") {
  for (bool skip : {false, true}) {
    NetworkModel m{skip_arch(Activation::sinusoidal), {}, NormalizationRefs{100, 2000, 5e6, 50, 60}};
    m.arch.skip_connections = skip;
    m.params = init_params(m.arch, 21);
    m.params[0] = 1.0 / 3.0;
    m.params[1] = -2.5e-300;
    const std::string doc = serialize_model(m);
    const NetworkModel back = deserialize_model(doc);
    CHECK(back.arch == m.arch);
    CHECK(back.norm == m.norm);
    CHECK((back.params - m.params).cwiseAbs().maxCoeff() == 0.0);
    CHECK(serialize_model(back) == doc);
  }
}

TEST_CASE("malformed model documents are rejected") {
  NetworkModel m{plain_arch(Activation::tanh), {}, NormalizationRefs{10, 100, 1e5, 1, 1000}};
  m.params = init_params(m.arch, 1);
  std::string doc = serialize_model(m);
  const auto pos = doc.find("\"format_version\": 1");
  REQUIRE(pos != std::string::npos);
  std::string v2 = doc;
  v2.replace(pos, 19, "\"format_version\": 2");
  CHECK_THROWS_AS(deserialize_model(v2), VersionError);
  CHECK_THROWS_AS(deserialize_model("{not json"), FormatError);
  CHECK_THROWS_AS(deserialize_model("{\"format_version\": 1}"), FormatError);
  m.params[3] = std::nan("");
  CHECK_THROWS_AS(serialize_model(m), NumericalError);
}

}  // TEST_SUITE

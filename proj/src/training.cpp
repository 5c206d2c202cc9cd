#include "pinc/training.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>

#include "pinc/dual.hpp"
#include "pinc/error.hpp"
#include "pinc/format.hpp"

namespace pinc::training {

using physics::Regime;

void TrainingConfig::validate() const {
  if (adam.epochs < 0) throw ConfigError("adam epochs must be >= 0");
  if (!(adam.learning_rate > 0)) throw ConfigError("learning rate must be > 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (lbfgs.memory < 1) throw ConfigError("lbfgs memory must be >= 1");
  if (lbfgs.max_iters < 0) throw ConfigError("lbfgs max_iters must be >= 0");
  if (!(lbfgs.c1 > 0 && lbfgs.c1 < lbfgs.c2 && lbfgs.c2 < 1)) {
    throw ConfigError("wolfe constants must satisfy 0 < c1 < c2 < 1");
  }
  if (sizes.n_f < 1 || sizes.n_b < 2) throw ConfigError("need n_f >= 1 and n_b >= 2");
  if (weights.lambda_f < 0 || weights.lambda_b < 0 || weights.lambda_i < 0 ||
      weights.lambda_d < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (!(u_low >= 0 && u_high <= 1 && u_low < u_high)) {
    throw ConfigError("control range must satisfy 0 <= u_low < u_high <= 1");
  }
  if (validation_every < 1) throw ConfigError("validation_every must be >= 1");
}

Eigen::MatrixXd map_controls(Eigen::MatrixXd inputs, Regime regime, double u_low,
                             double u_high) {
  const double span = u_high - u_low;
  if (regime == Regime::steady) {
    inputs.row(1) = (inputs.row(1).array() * span + u_low).matrix();
  } else {
    inputs.row(2) = (inputs.row(2).array() * span + u_low).matrix();
    inputs.row(3) = (inputs.row(3).array() * span + u_low).matrix();
  }
  return inputs;
}

namespace {

template <int N>
double pde_point(const physics::FluidSystem& sys, const NormalizationRefs& norm, Regime regime,
                 const net::JetBatch& jet, Eigen::Index i, double w, net::JetBatch* adj,
                 double& s_mass, double& s_mom) {
  using D = Dual<N>;
  physics::LocalFields<D> y;
  y.P = D::variable(jet.value(0, i), 0);
  y.V = D::variable(jet.value(1, i), 1);
  y.dP_dx = D::variable(jet.tangent[0](0, i), 2);
  y.dV_dx = D::variable(jet.tangent[0](1, i), 3);
  if constexpr (N == 6) {
    y.dP_dt = D::variable(jet.tangent[1](0, i), 4);
    y.dV_dt = D::variable(jet.tangent[1](1, i), 5);
  }
  const auto r = physics::pde_residual(sys, norm, regime, y);
  const double a = r[0].v;
  const double b = r[1].v;
  s_mass += a * a;
  s_mom += b * b;
  if (adj) {
    auto g = [&](int k) { return 2.0 * w * (a * r[0].d[k] + b * r[1].d[k]); };
    adj->value(0, i) = g(0);
    adj->value(1, i) = g(1);
    adj->tangent[0](0, i) = g(2);
    adj->tangent[0](1, i) = g(3);
    if constexpr (N == 6) {
      adj->tangent[1](0, i) = g(4);
      adj->tangent[1](1, i) = g(5);
    }
  }
  return w * (a * a + b * b);
}

struct ChunkSums {
  std::vector<double> a, b;
  explicit ChunkSums(std::size_t n) : a(n, 0.0), b(n, 0.0) {}
  double sum_a() const {
    double s = 0.0;
    for (double v : a) s += v;
    return s;
  }
  double sum_b() const {
    double s = 0.0;
    for (double v : b) s += v;
    return s;
  }
};

}  // namespace

LossFunction::LossFunction(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                           const net::Architecture& arch, Regime regime,
                           const sampling::TrainingSets& sets, const LossWeights& weights,
                           const net::NetworkModel* frozen_ss, int threads, double u_low,
                           double u_high)
    : sys_(sys), norm_(norm), arch_(arch), regime_(regime), weights_(weights) {
  const int dim = regime == Regime::steady ? 2 : 4;
  if (arch.input_dim != dim) {
    throw DimensionError("architecture input_dim does not match the regime");
  }
  if (arch.output_dim != 2) throw DimensionError("networks must output (P, V)");
  opts_.threads = threads;
  pde_ = map_controls(sampling::network_inputs(sets.pde, regime), regime, u_low, u_high);
  up_ = map_controls(sampling::network_inputs(sets.bc_up, regime), regime, u_low, u_high);
  down_ = map_controls(sampling::network_inputs(sets.bc_down, regime), regime, u_low, u_high);
  up_u_ = up_.row(dim - 1).transpose();
  down_u_ = down_.row(dim - 1).transpose();
  if (regime == Regime::transient) {
    if (!frozen_ss) throw ConfigError("transient loss needs a steady-state model");
    if (frozen_ss->arch.input_dim != 2) throw DimensionError("steady-state model must take (x, u)");
    ic_ = map_controls(sampling::network_inputs(sets.ic, regime), regime, u_low, u_high);
    Eigen::MatrixXd ss_in(2, ic_.cols());
    ss_in.row(0) = ic_.row(0);
    ss_in.row(1) = ic_.row(2);
    ic_target_ = net::evaluate_batch(frozen_ss->arch, frozen_ss->params, ss_in, {}, opts_).value;
  }
}

double LossFunction::run(const net::ParameterVector& params, Eigen::VectorXd* grad,
                         LossTerms& terms) const {
  const Eigen::Index cs = opts_.chunk_size;
  auto n_chunks = [&](Eigen::Index n) { return static_cast<std::size_t>((n + cs - 1) / cs); };
  double total = 0.0;
  Eigen::VectorXd g;
  if (grad) *grad = Eigen::VectorXd::Zero(params.size());

  // Evaluates one batch: gradient path through objective_gradient, value path through
  // a single pass over evaluate_batch. The per-point kernel is shared.
  auto batch = [&](const Eigen::MatrixXd& inputs, std::span<const int> dirs, auto&& kernel) {
    if (inputs.cols() == 0) return 0.0;
    if (grad) {
      const double v = net::objective_gradient(
          arch_, params, inputs, dirs,
          [&](const net::JetBatch& jet, std::size_t first, net::JetBatch& adj) {
            return kernel(jet, first, static_cast<std::size_t>(first / cs), &adj);
          },
          g, opts_);
      *grad += g;
      return v;
    }
    const net::JetBatch jet = net::evaluate_batch(arch_, params, inputs, dirs, opts_);
    return kernel(jet, 0, 0, nullptr);
  };

  // PDE residuals.
  {
    const double nf = static_cast<double>(pde_.cols());
    const double w = weights_.lambda_f / (2.0 * nf);
    ChunkSums sums(grad ? n_chunks(pde_.cols()) : 1);
    const bool steady = regime_ == Regime::steady;
    const std::vector<int> dirs = steady ? std::vector<int>{0} : std::vector<int>{0, 1};
    total += batch(pde_, dirs, [&](const net::JetBatch& jet, std::size_t, std::size_t c,
                                   net::JetBatch* adj) {
      double v = 0.0;
      for (Eigen::Index i = 0; i < jet.value.cols(); ++i) {
        v += steady ? pde_point<4>(sys_, norm_, regime_, jet, i, w, adj, sums.a[c], sums.b[c])
                    : pde_point<6>(sys_, norm_, regime_, jet, i, w, adj, sums.a[c], sums.b[c]);
      }
      return v;
    });
    terms.mass = sums.sum_a() / nf;
    terms.momentum = sums.sum_b() / nf;
  }

  // Boundary residuals.
  auto boundary = [&](const Eigen::MatrixXd& inputs, const Eigen::VectorXd& u, bool upstream,
                      double& term) {
    const double nb = static_cast<double>(inputs.cols());
    const double w = weights_.lambda_b / (2.0 * nb);
    ChunkSums sums(grad ? n_chunks(inputs.cols()) : 1);
    total += batch(inputs, {}, [&](const net::JetBatch& jet, std::size_t first, std::size_t c,
                                   net::JetBatch* adj) {
      using D = Dual<2>;
      double v = 0.0;
      for (Eigen::Index i = 0; i < jet.value.cols(); ++i) {
        const D P = D::variable(jet.value(0, i), 0);
        const D V = D::variable(jet.value(1, i), 1);
        const D r = upstream ? physics::bc_upstream(sys_, norm_, P, V)
                             : physics::bc_downstream(P, u[static_cast<Eigen::Index>(first) + i]);
        sums.a[c] += r.v * r.v;
        v += w * r.v * r.v;
        if (adj) {
          adj->value(0, i) = 2.0 * w * r.v * r.d[0];
          adj->value(1, i) = 2.0 * w * r.v * r.d[1];
        }
      }
      return v;
    });
    term = sums.sum_a() / nb;
  };
  boundary(up_, up_u_, true, terms.bc_up);
  boundary(down_, down_u_, false, terms.bc_down);

  // Initial condition against the frozen steady-state targets.
  if (regime_ == Regime::transient) {
    const double ni = static_cast<double>(ic_.cols());
    const double w = weights_.lambda_i / (2.0 * ni);
    ChunkSums sums(grad ? n_chunks(ic_.cols()) : 1);
    total += batch(ic_, {}, [&](const net::JetBatch& jet, std::size_t first, std::size_t c,
                                net::JetBatch* adj) {
      double v = 0.0;
      for (Eigen::Index i = 0; i < jet.value.cols(); ++i) {
        const Eigen::Index j = static_cast<Eigen::Index>(first) + i;
        const double rp = jet.value(0, i) - ic_target_(0, j);
        const double rv = jet.value(1, i) - ic_target_(1, j);
        sums.a[c] += rp * rp;
        sums.b[c] += rv * rv;
        v += w * (rp * rp + rv * rv);
        if (adj) {
          adj->value(0, i) = 2.0 * w * rp;
          adj->value(1, i) = 2.0 * w * rv;
        }
      }
      return v;
    });
    terms.ic = 0.5 * (sums.sum_a() + sums.sum_b()) / ni;
  }
  terms.total = total;
  return total;
}

double LossFunction::value_gradient(const net::ParameterVector& params, Eigen::VectorXd& grad,
                                    LossTerms* terms) const {
  LossTerms t;
  const double v = run(params, &grad, t);
  if (terms) *terms = t;
  return v;
}

LossTerms LossFunction::evaluate(const net::ParameterVector& params) const {
  LossTerms t;
  run(params, nullptr, t);
  return t;
}

OptResult adam_run(const Objective& f, Eigen::VectorXd x, const AdamConfig& cfg,
                   const Monitor& monitor) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd g(x.size());
  double b1t = 1.0;
  double b2t = 1.0;
  OptResult r;
  for (int t = 1; t <= cfg.epochs; ++t) {
    const double value = f(x, g);
    if (!std::isfinite(value) || !g.allFinite()) {
      throw NumericalError("non-finite loss at adam epoch " + std::to_string(t));
    }
    if (monitor) monitor(t, value, x);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXd m_hat = m.array() / (1.0 - b1t);
    const Eigen::ArrayXd v_hat = v.array() / (1.0 - b2t);
    x.array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    r.iterations = t;
  }
  r.value = cfg.epochs > 0 ? f(x, g) : std::numeric_limits<double>::quiet_NaN();
  r.x = std::move(x);
  r.status = "epochs";
  return r;
}

namespace {

struct Trial {
  double a = 0.0;
  double f = 0.0;
  double d = 0.0;  // directional derivative
  Eigen::VectorXd x, g;
};

// Minimizer of the cubic through (a, fa, da) and (b, fb, db); falls back to bisection.
double cubic_min(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0 || !std::isfinite(disc)) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
  if (!std::isfinite(t)) return 0.5 * (a + b);
  return t;
}

class LineSearch {
 public:
  LineSearch(const Objective& f, const LbfgsConfig& cfg, const Eigen::VectorXd& x,
             double f0, const Eigen::VectorXd& dir, double d0)
      : f_(f), cfg_(cfg), x_(x), f0_(f0), dir_(dir), d0_(d0) {}

  // Returns true and fills `out` when a strong Wolfe point is found.
  bool search(double a0, Trial& out, Trial& best) {
    best.f = f0_;
    Trial prev{0.0, f0_, d0_, {}, {}};
    double a = a0;
    for (int i = 0; i < cfg_.max_line_search_evals; ++i) {
      Trial cur = eval(a, best);
      if (!std::isfinite(cur.f) || cur.f > f0_ + cfg_.c1 * a * d0_ || (i > 0 && cur.f >= prev.f)) {
        if (!std::isfinite(cur.f)) {
          // Step left the finite region: retreat towards the last good point.
          a = 0.5 * (prev.a + a);
          continue;
        }
        return zoom(prev, cur, out, best);
      }
      if (std::fabs(cur.d) <= -cfg_.c2 * d0_) {
        out = std::move(cur);
        return true;
      }
      if (cur.d >= 0) return zoom(cur, prev, out, best);
      const double next = cubic_min(prev.a, prev.f, prev.d, cur.a, cur.f, cur.d);
      const double lo = cur.a + 1.1 * (cur.a - prev.a);
      const double hi = cur.a + 10.0 * (cur.a - prev.a);
      prev = std::move(cur);
      a = (next > lo && next < hi) ? next : std::min(2.0 * prev.a, hi);
    }
    return false;
  }

 private:
  Trial eval(double a, Trial& best) {
    Trial t;
    t.a = a;
    t.x = x_ + a * dir_;
    t.g.resize(x_.size());
    t.f = f_(t.x, t.g);
    t.d = t.g.dot(dir_);
    ++evals_;
    if (std::isfinite(t.f) && t.f < best.f) best = t;
    return t;
  }

  bool zoom(Trial lo, Trial hi, Trial& out, Trial& best) {
    while (evals_ < cfg_.max_line_search_evals) {
      const double width = hi.a - lo.a;
      if (std::fabs(width) < 1e-16 * std::max(1.0, std::fabs(lo.a))) return false;
      double a = cubic_min(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d);
      const double lo_b = std::min(lo.a, hi.a) + 0.1 * std::fabs(width);
      const double hi_b = std::max(lo.a, hi.a) - 0.1 * std::fabs(width);
      if (!(a > lo_b && a < hi_b)) a = 0.5 * (lo.a + hi.a);
      Trial cur = eval(a, best);
      if (!std::isfinite(cur.f) || cur.f > f0_ + cfg_.c1 * a * d0_ || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::fabs(cur.d) <= -cfg_.c2 * d0_) {
          out = std::move(cur);
          return true;
        }
        if (cur.d * (hi.a - lo.a) >= 0) hi = lo;
        lo = std::move(cur);
      }
    }
    return false;
  }

  const Objective& f_;
  const LbfgsConfig& cfg_;
  const Eigen::VectorXd& x_;
  double f0_;
  const Eigen::VectorXd& dir_;
  double d0_;
  int evals_ = 0;
};

}  // namespace

OptResult lbfgs_run(const Objective& f, Eigen::VectorXd x, const LbfgsConfig& cfg,
                    const Monitor& monitor) {
  Eigen::VectorXd g(x.size());
  double fx = f(x, g);
  if (!std::isfinite(fx)) throw NumericalError("non-finite loss at the L-BFGS start");
  OptResult r;
  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  r.status = "max_iters";
  for (int it = 1; it <= cfg.max_iters + 1; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      r.status = "grad_tol";
      break;
    }
    if (it > cfg.max_iters) break;

    // Two-loop recursion.
    Eigen::VectorXd q = -g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    if (!S.empty()) q *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t i = 0; i < S.size(); ++i) {
      const double beta = rho[i] * Y[i].dot(q);
      q += (alpha[i] - beta) * S[i];
    }
    double d0 = g.dot(q);
    if (!(d0 < 0)) {
      S.clear();
      Y.clear();
      rho.clear();
      q = -g;
      d0 = g.dot(q);
    }
    const double a0 = S.empty() ? std::min(1.0, 1.0 / g.lpNorm<1>()) : 1.0;

    LineSearch ls(f, cfg, x, fx, q, d0);
    Trial accepted, best;
    if (!ls.search(a0, accepted, best)) {
      if (best.x.size() == x.size() && best.f < fx) {
        x = best.x;
        fx = best.f;
        g = best.g;
      }
      r.status = "line_search_failed";
      r.iterations = it - 1;
      break;
    }
    const Eigen::VectorXd s = accepted.x - x;
    const Eigen::VectorXd y = accepted.g - g;
    const double f_prev = fx;
    x = std::move(accepted.x);
    g = std::move(accepted.g);
    fx = accepted.f;
    r.iterations = it;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm()) {
      if (static_cast<int>(S.size()) == cfg.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
    }
    if (monitor) monitor(it, fx, x);
    if (cfg.tol_change > 0 && std::fabs(f_prev - fx) <= cfg.tol_change) {
      r.status = "tol_change";
      break;
    }
  }
  r.x = std::move(x);
  r.value = fx;
  return r;
}

namespace {

TrainResult train_impl(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                       const net::Architecture& arch, const TrainingConfig& cfg, Regime regime,
                       const net::NetworkModel* frozen) {
  sys.validate();
  norm.validate();
  cfg.validate();
  if (frozen && !(frozen->norm == norm)) {
    throw ConfigError("steady-state model was trained with different normalization references");
  }
  const auto sets = sampling::build_training_sets(regime, cfg.sizes, cfg.sampling_seed);
  const auto val_sets = sampling::build_training_sets(regime, cfg.sizes, cfg.validation_seed);
  const LossFunction loss(sys, norm, arch, regime, sets, cfg.weights, frozen, cfg.threads,
                          cfg.u_low, cfg.u_high);
  const LossFunction val(sys, norm, arch, regime, val_sets, cfg.weights, frozen, cfg.threads,
                         cfg.u_low, cfg.u_high);

  TrainResult out;
  Eigen::VectorXd cache_x;
  LossTerms cache_terms;
  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    const double v = loss.value_gradient(x, g, &cache_terms);
    cache_x = x;
    return v;
  };
  int epoch_offset = 0;
  std::string phase;
  const Monitor monitor = [&](int it, double, const Eigen::VectorXd& x) {
    LossRecord rec;
    rec.phase = phase;
    rec.epoch = epoch_offset + it;
    const bool cached = cache_x.size() == x.size() && (cache_x.array() == x.array()).all();
    rec.train = cached ? cache_terms : loss.evaluate(x);
    if (rec.epoch % cfg.validation_every == 0) rec.validation = val.evaluate(x);
    if (cfg.verbose && (rec.epoch % cfg.validation_every == 0)) {
      std::fprintf(stderr, "[%s %6d] loss %.6e  val %.6e\n", phase.c_str(), rec.epoch,
                   rec.train.total, rec.validation ? rec.validation->total : 0.0);
    }
    out.report.records.push_back(rec);
  };

  net::ParameterVector params = net::init_params(arch, cfg.weight_seed);
  phase = "adam";
  OptResult a = adam_run(objective, params, cfg.adam, monitor);
  epoch_offset = a.iterations;
  phase = "lbfgs";
  OptResult b = lbfgs_run(objective, std::move(a.x), cfg.lbfgs, monitor);
  out.report.stop_reason = b.status;
  out.report.final_validation = val.evaluate(b.x);
  out.model = net::NetworkModel{arch, std::move(b.x), norm};
  return out;
}

}  // namespace

TrainResult train_steady(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                         const net::Architecture& arch, const TrainingConfig& cfg) {
  if (arch.input_dim != 2) throw ConfigError("steady-state networks take (x, u)");
  return train_impl(sys, norm, arch, cfg, Regime::steady, nullptr);
}

TrainResult train_transient(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                            const net::Architecture& arch, const TrainingConfig& cfg,
                            const net::NetworkModel& frozen_ss) {
  if (arch.input_dim != 4) throw ConfigError("transient networks take (x, t, u0, u)");
  if (cfg.sizes.n_i < 1) throw ConfigError("transient training needs n_i >= 1");
  return train_impl(sys, norm, arch, cfg, Regime::transient, &frozen_ss);
}

SweepResult seed_sweep(std::span<const std::uint64_t> seeds,
                       const std::function<TrainResult(std::uint64_t)>& train,
                       const std::function<double(const TrainResult&)>& score,
                       std::optional<double> accept_at) {
  if (seeds.empty()) throw ConfigError("seed sweep needs at least one seed");
  SweepResult r;
  for (std::uint64_t s : seeds) {
    TrainResult t = train(s);
    const double sc = score(t);
    r.outcomes.push_back({s, sc});
    if (r.outcomes.size() == 1 || sc < r.outcomes[r.best].score) {
      r.best = r.outcomes.size() - 1;
      r.best_result = std::move(t);
    }
    if (accept_at && sc <= *accept_at) break;
  }
  return r;
}

void write_loss_csv(const LossReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,term,value\n";
  auto emit = [&](int epoch, const std::string& prefix, const LossTerms& t) {
    const std::pair<const char*, double> rows[] = {
        {"mass", t.mass},       {"momentum", t.momentum}, {"bc_up", t.bc_up},
        {"bc_down", t.bc_down}, {"ic", t.ic},             {"total", t.total}};
    for (const auto& [name, v] : rows) {
      out << epoch << ',' << prefix << name << ',' << format_double(v) << '\n';
    }
  };
  for (const auto& rec : report.records) {
    emit(rec.epoch, "train_", rec.train);
    if (rec.validation) emit(rec.epoch, "val_", *rec.validation);
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace pinc::training

#include "pinc/mpc.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "pinc/error.hpp"
#include "pinc/format.hpp"

namespace pinc::mpc {

void MpcConfig::validate(const NormalizationRefs& norm) const {
  if (n_c < 1 || n_p < n_c) throw ConfigError("mpc horizons must satisfy 1 <= n_c <= n_p");
  const double ts = T_s / norm.t_ref;
  if (!(ts > 0 && ts <= 1.0 + 1e-12)) throw ConfigError("mpc T_s / t_ref must lie in (0, 1]");
  if (!(dy_max >= 0)) throw ConfigError("mpc dy_max must be >= 0");
  if (!(lambda >= 0)) throw ConfigError("mpc lambda must be >= 0");
  if (du_max && !(*du_max >= 0)) throw ConfigError("mpc du_max must be >= 0");
  if (!(x_probe >= 0 && x_probe <= 1)) throw ConfigError("mpc probe must lie in [0, 1]");
  if (!(tol > 0) || max_outer < 1 || max_inner < 1 || init_grid < 0) {
    throw ConfigError("invalid mpc solver settings");
  }
}

namespace {

// u_0..u_{N_p}, the tail holding the last move.
Eigen::VectorXd expand(double u0, const Eigen::VectorXd& moves, int n_p) {
  Eigen::VectorXd u(n_p + 1);
  u[0] = u0;
  const int n_c = static_cast<int>(moves.size());
  for (int i = 1; i <= n_p; ++i) u[i] = moves[std::min(i, n_c) - 1];
  return u;
}

Eigen::VectorXd project(Eigen::VectorXd x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

Eigen::MatrixXd Predictor::jacobian(double u0, const Eigen::VectorXd& moves) const {
  const Eigen::VectorXd y0 = predict(u0, moves);
  Eigen::MatrixXd J(y0.size(), moves.size());
  const double h = 1e-5;
  for (Eigen::Index c = 0; c < moves.size(); ++c) {
    Eigen::VectorXd up = moves, dn = moves;
    up[c] = std::min(1.0, moves[c] + h);
    dn[c] = std::max(0.0, moves[c] - h);
    J.col(c) = (predict(u0, up) - predict(u0, dn)) / (up[c] - dn[c]);
  }
  return J;
}

PincPredictor::PincPredictor(const net::NetworkModel& model, const MpcConfig& cfg)
    : model_(model), cfg_(cfg) {
  if (model.arch.input_dim != 4) throw DimensionError("MPC predictor needs a transient network");
}

Eigen::MatrixXd PincPredictor::inputs(double u0, const Eigen::VectorXd& moves) const {
  const Eigen::VectorXd u = expand(u0, moves, cfg_.n_p);
  Eigen::MatrixXd in(4, cfg_.n_p);
  const double ts = cfg_.T_s / model_.norm.t_ref;
  for (int i = 1; i <= cfg_.n_p; ++i) {
    in(0, i - 1) = cfg_.x_probe;
    in(1, i - 1) = ts;
    in(2, i - 1) = u[i - 1];
    in(3, i - 1) = u[i];
  }
  return in;
}

Eigen::VectorXd PincPredictor::predict(double u0, const Eigen::VectorXd& moves) const {
  return net::evaluate_batch(model_.arch, model_.params, inputs(u0, moves), {}).value.row(0).transpose();
}

Eigen::MatrixXd PincPredictor::jacobian(double u0, const Eigen::VectorXd& moves) const {
  const int dirs[2] = {2, 3};
  const net::JetBatch jet = net::evaluate_batch(model_.arch, model_.params, inputs(u0, moves), dirs);
  const int n_c = static_cast<int>(moves.size());
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(cfg_.n_p, n_c);
  for (int i = 1; i <= cfg_.n_p; ++i) {
    if (i - 1 >= 1) J(i - 1, std::min(i - 1, n_c) - 1) += jet.tangent[0](0, i - 1);
    J(i - 1, std::min(i, n_c) - 1) += jet.tangent[1](0, i - 1);
  }
  return J;
}

PlantPredictor::PlantPredictor(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                               const plant::PlantOptions& opts, double dt, const MpcConfig& cfg)
    : sys_(sys), norm_(norm), opts_(opts), dt_(dt), cfg_(cfg) {}

Eigen::VectorXd PlantPredictor::predict(double u0, const Eigen::VectorXd& moves) const {
  if (state_.P.size() == 0) throw ConfigError("plant predictor used before observing a state");
  const Eigen::VectorXd u = expand(u0, moves, cfg_.n_p);
  const long steps = std::lround(cfg_.T_s / dt_);
  plant::PlantState s = state_;
  Eigen::VectorXd y(cfg_.n_p);
  for (int i = 1; i <= cfg_.n_p; ++i) {
    for (long k = 0; k < steps; ++k) s = plant::step_transient(sys_, norm_, s, u[i], dt_, opts_);
    y[i - 1] = plant::probe(sys_, s, cfg_.x_probe).P / norm_.P_ref;
  }
  return y;
}

double HorizonProblem::objective(const Eigen::VectorXd& moves, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd u = expand(u0, moves, cfg.n_p);
  double j = (y.array() + bias - cfg.y_target).square().sum();
  for (int i = 1; i <= cfg.n_c; ++i) j += cfg.lambda * (u[i] - u[i - 1]) * (u[i] - u[i - 1]);
  return j;
}

namespace {

// Constraint values and their Jacobian with respect to the moves.
void constraint_system(const HorizonProblem& p, const Eigen::VectorXd& moves,
                       const Eigen::VectorXd& y, const Eigen::MatrixXd* Jy, Eigen::VectorXd& g,
                       Eigen::MatrixXd* G) {
  const MpcConfig& cfg = p.cfg;
  const int n_c = cfg.n_c;
  const bool settles = p.predictor.settles_after_control_horizon();
  const Eigen::VectorXd u = expand(p.u0, moves, cfg.n_p);
  std::vector<double> vals;
  std::vector<Eigen::RowVectorXd> rows;
  auto add = [&](double v, const Eigen::RowVectorXd& r) {
    vals.push_back(v);
    if (G) rows.push_back(r);
  };
  const Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(n_c);
  auto jrow = [&](int i) { return Jy ? Eigen::RowVectorXd(Jy->row(i)) : zero; };
  if (cfg.first_step_constraint) {
    const double d = y[0] + p.bias - p.y0;
    add(d - cfg.dy_max, jrow(0));
    add(-d - cfg.dy_max, -jrow(0));
  }
  if (cfg.move_constraints) {
    for (int i = 1; i < cfg.n_p; ++i) {
      const double d = y[i] - y[i - 1];
      // Beyond the control horizon consecutive predictions may coincide exactly.
      if (settles && i > n_c) continue;
      add(d - cfg.dy_max, jrow(i) - jrow(i - 1));
      add(-d - cfg.dy_max, jrow(i - 1) - jrow(i));
    }
  }
  if (cfg.y_min) {
    for (int i = 0; i < cfg.n_p; ++i) {
      if (settles && i > n_c) continue;  // same prediction as i = n_c
      add(*cfg.y_min - (y[i] + p.bias), -jrow(i));
    }
  }
  if (cfg.du_max) {
    for (int i = 1; i <= n_c; ++i) {
      Eigen::RowVectorXd r = zero;
      r[i - 1] = 1.0;
      if (i >= 2) r[i - 2] = -1.0;
      const double d = u[i] - u[i - 1];
      add(d - *cfg.du_max, r);
      add(-d - *cfg.du_max, -r);
    }
  }
  g = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  if (G) {
    G->resize(static_cast<Eigen::Index>(rows.size()), n_c);
    for (std::size_t k = 0; k < rows.size(); ++k) G->row(static_cast<Eigen::Index>(k)) = rows[k];
  }
}

double max_excess(const Eigen::VectorXd& g) {
  return g.size() == 0 ? 0.0 : std::max(0.0, g.maxCoeff());
}

Eigen::VectorXd objective_gradient(const HorizonProblem& p, const Eigen::VectorXd& moves,
                                   const Eigen::VectorXd& y, const Eigen::MatrixXd& Jy) {
  const Eigen::VectorXd u = expand(p.u0, moves, p.cfg.n_p);
  Eigen::VectorXd g = 2.0 * Jy.transpose() * (y.array() + p.bias - p.cfg.y_target).matrix();
  for (int i = 1; i <= p.cfg.n_c; ++i) {
    const double d = 2.0 * p.cfg.lambda * (u[i] - u[i - 1]);
    g[i - 1] += d;
    if (i >= 2) g[i - 2] -= d;
  }
  return g;
}

struct Candidate {
  Eigen::VectorXd moves;
  double objective = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
};

// Feasible beats infeasible; among feasible the lower objective wins, otherwise the lower excess.
bool better(const Candidate& a, const Candidate& b, double tol) {
  const bool fa = a.violation <= tol;
  const bool fb = b.violation <= tol;
  if (fa != fb) return fa;
  if (fa) return a.objective < b.objective;
  return a.violation < b.violation;
}

Candidate assess(const HorizonProblem& p, const Eigen::VectorXd& moves) {
  Candidate c;
  c.moves = moves;
  Eigen::VectorXd y;
  try {
    y = p.predictor.predict(p.u0, moves);
  } catch (const NumericalError&) {
    return c;  // e.g. a gas outlet at zero pressure; never selected
  }
  Eigen::VectorXd g;
  constraint_system(p, moves, y, nullptr, g, nullptr);
  c.objective = p.objective(moves, y);
  c.violation = max_excess(g);
  return c;
}

// Tensor grid over per-variable value lists.
template <class Fn>
void for_each_grid_point(const std::vector<std::vector<double>>& axes, Fn&& fn) {
  const std::size_t n = axes.size();
  std::vector<std::size_t> idx(n, 0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  while (true) {
    for (std::size_t i = 0; i < n; ++i) x[static_cast<Eigen::Index>(i)] = axes[i][idx[i]];
    fn(x);
    std::size_t k = 0;
    while (k < n && ++idx[k] == axes[k].size()) idx[k++] = 0;
    if (k == n) return;
  }
}

std::vector<double> axis(double lo, double hi, int points) {
  std::vector<double> a;
  lo = std::max(0.0, lo);
  hi = std::min(1.0, hi);
  if (points <= 1 || hi <= lo) return {0.5 * (lo + hi)};
  for (int i = 0; i < points; ++i) a.push_back(lo + (hi - lo) * i / (points - 1));
  return a;
}

Candidate grid_search(const HorizonProblem& p, const Eigen::VectorXd& center, double radius,
                      int points) {
  Candidate best;
  std::vector<std::vector<double>> axes;
  for (Eigen::Index i = 0; i < center.size(); ++i) {
    axes.push_back(axis(center[i] - radius, center[i] + radius, points));
  }
  for_each_grid_point(axes, [&](const Eigen::VectorXd& x) {
    Candidate c = assess(p, x);
    if (better(c, best, p.cfg.tol)) best = std::move(c);
  });
  return best;
}

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const HorizonProblem& p, const Eigen::VectorXd& lambda, double rho)
      : p_(p), lambda_(lambda), rho_(rho) {}

  double value_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    const Eigen::VectorXd y = p_.predictor.predict(p_.u0, x);
    const Eigen::MatrixXd Jy = p_.predictor.jacobian(p_.u0, x);
    Eigen::VectorXd g;
    Eigen::MatrixXd G;
    constraint_system(p_, x, y, &Jy, g, &G);
    double v = p_.objective(x, y);
    grad = objective_gradient(p_, x, y, Jy);
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double s = std::max(0.0, lambda_[j] + rho_ * g[j]);
      v += (s * s - lambda_[j] * lambda_[j]) / (2.0 * rho_);
      grad += s * G.row(j).transpose();
    }
    return v;
  }

 private:
  const HorizonProblem& p_;
  const Eigen::VectorXd& lambda_;
  double rho_;
};

// Projected BFGS on the unit box.
Eigen::VectorXd minimize_box(const AugmentedLagrangian& f, Eigen::VectorXd x, int max_iter,
                             double tol) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n), g_new(n);
  double fx = f.value_gradient(x, g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iter; ++it) {
    if ((x - project(x - g)).lpNorm<Eigen::Infinity>() <= 0.1 * tol) break;
    Eigen::VectorXd d = -H * g;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = x[i] <= 0.0 && g[i] > 0;
      const bool at_hi = x[i] >= 1.0 && g[i] < 0;
      if (at_lo || at_hi) d[i] = 0.0;
    }
    if (g.dot(d) >= 0) {
      H.setIdentity();
      d = project(x - g) - x;
    }
    double alpha = 1.0;
    bool moved = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int k = 0; k < 50; ++k, alpha *= 0.5) {
      x_new = project(x + alpha * d);
      try {
        f_new = f.value_gradient(x_new, g_new);
      } catch (const NumericalError&) {
        continue;  // outside the predictor's domain; shorten the step
      }
      if (f_new <= fx + 1e-4 * g.dot(x_new - x)) {
        moved = true;
        break;
      }
    }
    if (!moved) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    x = x_new;
    g = g_new;
    const bool stalled = std::fabs(fx - f_new) <= 1e-16 * std::max(1.0, std::fabs(fx)) &&
                         s.lpNorm<Eigen::Infinity>() <= 1e-14;
    fx = f_new;
    if (stalled) break;
    const double sy = s.dot(yv);
    if (sy > 1e-14) {
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      const double r = 1.0 / sy;
      H = (I - r * s * yv.transpose()) * H * (I - r * yv * s.transpose()) + r * s * s.transpose();
    }
  }
  return x;
}

}  // namespace

Eigen::VectorXd HorizonProblem::constraints(const Eigen::VectorXd& moves,
                                            const Eigen::VectorXd& y) const {
  Eigen::VectorXd g;
  constraint_system(*this, moves, y, nullptr, g, nullptr);
  return g;
}

double HorizonProblem::violation(const Eigen::VectorXd& moves) const {
  return max_excess(constraints(moves, predictor.predict(u0, moves)));
}

MpcSolution solve_horizon(const Predictor& predictor, const MpcConfig& cfg, double u0, double y0,
                          double bias) {
  if (!(u0 >= 0 && u0 <= 1)) throw ConfigError("mpc u0 must lie in [0, 1]");
  if (!std::isfinite(y0) || !std::isfinite(bias)) throw NumericalError("mpc y0 and bias must be finite");
  const HorizonProblem p{predictor, cfg, u0, y0, bias};
  const int n_c = cfg.n_c;

  // Start: hold the current control, or the best point of a coarse global plus local grid.
  Candidate start = assess(p, Eigen::VectorXd::Constant(n_c, u0));
  if (cfg.init_grid > 1 && n_c <= 2) {
    const Eigen::VectorXd mid = Eigen::VectorXd::Constant(n_c, 0.5);
    Candidate g1 = grid_search(p, mid, 0.5, cfg.init_grid);
    const double local = cfg.du_max ? std::max(1e-3, *cfg.du_max * n_c) : 0.2;
    Candidate g2 = grid_search(p, Eigen::VectorXd::Constant(n_c, u0), local, cfg.init_grid);
    if (better(g1, start, cfg.tol)) start = g1;
    if (better(g2, start, cfg.tol)) start = g2;
  }

  Eigen::VectorXd lambda;
  {
    Eigen::VectorXd g0 = p.constraints(start.moves, predictor.predict(u0, start.moves));
    lambda = Eigen::VectorXd::Zero(g0.size());
  }
  double rho = 100.0;
  double last_violation = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x = start.moves;
  Candidate incumbent = start;
  MpcSolution sol;
  sol.status = "max_outer";
  double pg = std::numeric_limits<double>::infinity();
  for (int outer = 1; outer <= cfg.max_outer; ++outer) {
    const AugmentedLagrangian al(p, lambda, rho);
    const Eigen::VectorXd x_prev = x;
    x = minimize_box(al, x, cfg.max_inner, cfg.tol);
    const Eigen::VectorXd y = predictor.predict(u0, x);
    const Eigen::MatrixXd Jy = predictor.jacobian(u0, x);
    Eigen::VectorXd g;
    Eigen::MatrixXd G;
    constraint_system(p, x, y, &Jy, g, &G);
    const double violation = max_excess(g);
    lambda = (lambda + rho * g).cwiseMax(0.0);
    Eigen::VectorXd lg = objective_gradient(p, x, y, Jy);
    if (G.rows() > 0) lg += G.transpose() * lambda;
    pg = (x - project(x - lg)).lpNorm<Eigen::Infinity>();
    Candidate c{x, p.objective(x, y), violation};
    if (better(c, incumbent, cfg.tol)) incumbent = c;
    if (incumbent.violation <= cfg.tol) sol.incumbent_objective.push_back(incumbent.objective);
    sol.outer_iterations = outer;
    if (violation <= cfg.tol && pg <= cfg.tol) {
      sol.status = "converged";
      break;
    }
    // Noisy predictors (finite differences through a solver) may never meet the gradient test.
    if (violation <= cfg.tol && outer > 1 && (x - x_prev).lpNorm<Eigen::Infinity>() <= 1e-10) {
      sol.status = "stalled";
      break;
    }
    if (violation > 0.25 * last_violation) rho = std::min(rho * 10.0, 1e12);
    last_violation = violation;
  }

  if (incumbent.violation > cfg.tol) {
    // Grid refinement around the least infeasible point guards against a stalled solve.
    Candidate best = incumbent;
    double radius = 0.5;
    for (int level = 0; level < 8 && n_c <= 3; ++level) {
      Candidate c = grid_search(p, best.moves, radius, 11);
      if (better(c, best, cfg.tol)) best = c;
      radius *= 0.3;
    }
    sol.status = best.violation <= cfg.tol ? "grid" : "infeasible";
    incumbent = best;
    if (best.violation <= cfg.tol) sol.incumbent_objective.push_back(best.objective);
  }
  sol.moves = incumbent.moves;
  sol.predicted = predictor.predict(u0, sol.moves);
  sol.objective = incumbent.objective;
  sol.violation = incumbent.violation;
  sol.projected_gradient = pg;
  return sol;
}

int count_rate_violations(const std::vector<StepRecord>& history, double dy_max_pa) {
  int n = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    const double move = std::fabs(history[i].y_measured_pa - history[i - 1].y_measured_pa);
    if (move > 1.25 * dy_max_pa * (1.0 + 1e-12)) ++n;
  }
  return n;
}

ClosedLoopResult closed_loop(Predictor& predictor, const physics::FluidSystem& sys,
                             const NormalizationRefs& norm, const plant::PlantOptions& plant_opts,
                             double dt, const MpcConfig& cfg, double u0_init, double duration,
                             const BoundSchedule& y_min_schedule) {
  cfg.validate(norm);
  const long sub = std::lround(cfg.T_s / dt);
  if (sub < 1 || std::fabs(sub * dt - cfg.T_s) > 1e-9 * cfg.T_s) {
    throw ConfigError("plant time step must divide the MPC sampling time");
  }
  const long n_steps = std::lround(duration / cfg.T_s);
  plant::PlantState state = plant::steady_state(sys, norm, u0_init, plant_opts);
  MpcConfig step_cfg = cfg;
  double u_cur = u0_init;
  double y_pred_next = std::numeric_limits<double>::quiet_NaN();
  ClosedLoopResult out;
  for (long s = 0; s <= n_steps; ++s) {
    const double t = static_cast<double>(s) * cfg.T_s;
    const double y_meas = plant::probe(sys, state, cfg.x_probe).P / norm.P_ref;
    predictor.observe(state);
    const double y_pred = s == 0 ? y_meas : y_pred_next;
    const double bias = s == 0 ? 0.0 : y_meas - y_pred;
    for (const auto& [t0, v] : y_min_schedule) {
      if (t0 <= t + 1e-9) step_cfg.y_min = v;
    }
    StepRecord rec;
    rec.t_seconds = t;
    rec.y_measured_pa = y_meas * norm.P_ref;
    rec.y_pred_pa = y_pred * norm.P_ref;
    rec.bias_pa = bias * norm.P_ref;
    double u_next = u_cur;
    try {
      const MpcSolution sol = solve_horizon(predictor, step_cfg, u_cur, y_meas, bias);
      u_next = sol.moves[0];
      rec.solve_status = sol.status;
      rec.objective = sol.objective;
      y_pred_next = sol.predicted[0];
    } catch (const NumericalError&) {
      rec.solve_status = "failed";
      rec.objective = std::numeric_limits<double>::quiet_NaN();
      Eigen::VectorXd hold = Eigen::VectorXd::Constant(cfg.n_c, u_cur);
      y_pred_next = predictor.predict(u_cur, hold)[0];
    }
    rec.u_applied = u_next;
    out.history.push_back(rec);
    if (s == n_steps) break;
    for (long k = 0; k < sub; ++k) state = plant::step_transient(sys, norm, state, u_next, dt, plant_opts);
    u_cur = u_next;
  }
  out.violations = count_rate_violations(out.history, cfg.dy_max * norm.P_ref);
  return out;
}

void write_closed_loop_csv(const ClosedLoopResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "t_seconds,u_applied,y_measured_pa,y_pred_pa,bias_pa,solve_status,objective\n";
  for (const auto& r : result.history) {
    out << format_double(r.t_seconds) << ',' << format_double(r.u_applied) << ','
        << format_double(r.y_measured_pa) << ',' << format_double(r.y_pred_pa) << ','
        << format_double(r.bias_pa) << ',' << r.solve_status << ',' << format_double(r.objective)
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace pinc::mpc

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinc/net.hpp"
#include "pinc/physics.hpp"
#include "pinc/sampling.hpp"

namespace pinc::training {

struct LossWeights {
  double lambda_f = 1.0;
  double lambda_b = 1.0;
  double lambda_i = 1.0;
  double lambda_d = 0.0;  // no labeled data term is assembled; kept for completeness
};

struct AdamConfig {
  int epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct LbfgsConfig {
  int memory = 50;
  int max_iters = 20000;
  double grad_tol = 1e-9;  // on the infinity norm
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search_evals = 25;
  double tol_change = 0.0;  // stop when |f_k - f_{k-1}| <= tol_change; 0 disables
};

struct TrainingConfig {
  sampling::TrainingSizes sizes;
  AdamConfig adam;
  LbfgsConfig lbfgs;
  LossWeights weights;
  std::uint64_t sampling_seed = 1;
  std::uint64_t weight_seed = 1;
  std::uint64_t validation_seed = 1000003;
  int validation_every = 10;
  int threads = 1;
  double u_low = 0.0;  // sampled controls are mapped affinely onto [u_low, u_high]
  double u_high = 1.0;
  bool verbose = false;

  void validate() const;
};

/// Mean squared residual per term; ic is the average over the two outputs.
struct LossTerms {
  double mass = 0.0;
  double momentum = 0.0;
  double bc_up = 0.0;
  double bc_down = 0.0;
  double ic = 0.0;
  double total = 0.0;
};

struct LossRecord {
  std::string phase;
  int epoch = 0;
  LossTerms train;
  std::optional<LossTerms> validation;
};

struct LossReport {
  std::vector<LossRecord> records;
  std::string stop_reason;
  std::optional<LossTerms> final_validation;
};

/// Weighted physics loss of one regime over fixed point sets.
class LossFunction {
 public:
  /// frozen_ss supplies IC targets and is required for the transient regime.
  LossFunction(const physics::FluidSystem& sys, const NormalizationRefs& norm,
               const net::Architecture& arch, physics::Regime regime,
               const sampling::TrainingSets& sets, const LossWeights& weights,
               const net::NetworkModel* frozen_ss, int threads = 1, double u_low = 0.0,
               double u_high = 1.0);

  /// Total loss and its parameter gradient.
  double value_gradient(const net::ParameterVector& params, Eigen::VectorXd& grad,
                        LossTerms* terms = nullptr) const;
  LossTerms evaluate(const net::ParameterVector& params) const;

  const net::Architecture& arch() const { return arch_; }
  const Eigen::MatrixXd& pde_inputs() const { return pde_; }

 private:
  double run(const net::ParameterVector& params, Eigen::VectorXd* grad, LossTerms& terms) const;

  physics::FluidSystem sys_;
  NormalizationRefs norm_;
  net::Architecture arch_;
  physics::Regime regime_;
  LossWeights weights_;
  Eigen::MatrixXd pde_, up_, down_, ic_;
  Eigen::VectorXd up_u_, down_u_;  // control at each boundary point
  Eigen::MatrixXd ic_target_;
  net::GradientOptions opts_;
};

/// Applies the affine control map and pinned coordinates, producing network inputs.
Eigen::MatrixXd map_controls(Eigen::MatrixXd inputs, physics::Regime regime, double u_low,
                             double u_high);

using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;
using Monitor = std::function<void(int iteration, double value, const Eigen::VectorXd& x)>;

struct OptResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  std::string status;
};

/// Full-batch ADAM with bias correction. Throws NumericalError on a non-finite loss.
OptResult adam_run(const Objective& f, Eigen::VectorXd x0, const AdamConfig& cfg,
                   const Monitor& monitor = {});

/// Two-loop L-BFGS with a strong Wolfe line search. Status is one of "grad_tol",
/// "max_iters", "tol_change" or "line_search_failed"; the best point seen is returned.
OptResult lbfgs_run(const Objective& f, Eigen::VectorXd x0, const LbfgsConfig& cfg,
                    const Monitor& monitor = {});

struct TrainResult {
  net::NetworkModel model;
  LossReport report;
};

TrainResult train_steady(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                         const net::Architecture& arch, const TrainingConfig& cfg);

/// frozen_ss is read only; its parameters are never touched.
TrainResult train_transient(const physics::FluidSystem& sys, const NormalizationRefs& norm,
                            const net::Architecture& arch, const TrainingConfig& cfg,
                            const net::NetworkModel& frozen_ss);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double score = 0.0;
};

struct SweepResult {
  std::vector<SeedOutcome> outcomes;
  std::size_t best = 0;
  TrainResult best_result;
};

/// Trains once per seed and keeps the lowest score. When accept_at is set, the sweep stops
/// at the first seed scoring at or below it, since later seeds cannot worsen the minimum.
SweepResult seed_sweep(std::span<const std::uint64_t> seeds,
                       const std::function<TrainResult(std::uint64_t)>& train,
                       const std::function<double(const TrainResult&)>& score,
                       std::optional<double> accept_at = std::nullopt);

/// Long-format CSV: epoch, term, value. Phase is folded into the term name.
void write_loss_csv(const LossReport& report, const std::string& path);

}  // namespace pinc::training

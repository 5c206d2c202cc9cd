#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pinc/normalization.hpp"

namespace pinc::net {

enum class Activation { tanh, sinusoidal, swish };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct Architecture {
  int input_dim = 2;
  int output_dim = 2;
  int n_layers = 4;
  int hidden_size = 20;
  Activation activation = Activation::tanh;
  bool skip_connections = false;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

using ParameterVector = Eigen::VectorXd;

enum class Role { weight, bias, act_sin, act_cos };

/// One tensor of the flat parameter vector. Weights are stored row-major.
struct Block {
  int layer = 0;
  Role role = Role::weight;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
};

/// Fixed ordering of every trainable tensor inside a ParameterVector.
///
/// Plain network: layers 0..n_layers-1 are hidden, layer n_layers is the output.
/// Skip network: layer 0 is the U encoder, 1 the V encoder, 2..n_layers+1 the gates
/// Z^1..Z^{n_layers}, and n_layers+2 the output. For each layer the weight precedes
/// the bias; sinusoidal (w1, w2) pairs for every activated layer follow all affine
/// tensors, in layer order.
class ParameterLayout {
 public:
  explicit ParameterLayout(const Architecture& arch);

  std::size_t size() const { return size_; }
  int n_affine() const { return n_affine_; }
  const Block& block(int layer, Role role) const;
  std::size_t index(int layer, Role role, int row = 0, int col = 0) const;
  const std::vector<Block>& blocks() const { return blocks_; }
  int output_layer() const { return n_affine_ - 1; }

 private:
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
  int n_affine_ = 0;
};

/// Glorot-uniform weights, zero biases, sinusoidal w1 = 1 and w2 = 0.
/// The stream is mt19937_64 with 53-bit mantissa draws, so values are platform independent.
ParameterVector init_params(const Architecture& arch, std::uint64_t seed);

Eigen::VectorXd forward_plain(const Architecture& arch, const ParameterVector& params,
                              std::span<const double> input);
Eigen::VectorXd forward_skip(const Architecture& arch, const ParameterVector& params,
                             std::span<const double> input);
/// Dispatches on arch.skip_connections.
Eigen::VectorXd forward(const Architecture& arch, const ParameterVector& params,
                        std::span<const double> input);

struct EvalResult {
  Eigen::VectorXd output;
  Eigen::MatrixXd input_jacobian;  // output_dim x input_dim
};

EvalResult eval_with_input_derivatives(const Architecture& arch, const ParameterVector& params,
                                       std::span<const double> input);

/// Outputs of a batch together with their derivatives along selected input directions.
/// value is output_dim x n; tangent[d] holds d(output)/d(input[dirs[d]]).
struct JetBatch {
  Eigen::MatrixXd value;
  std::vector<Eigen::MatrixXd> tangent;
};

/// Per-chunk objective. Receives the jets of points [first, first + jet.value.cols()),
/// returns the chunk's contribution to the scalar and writes d(objective)/d(jet) into
/// adjoint, which arrives zero-filled with matching shapes.
using ChunkObjective =
    std::function<double(const JetBatch& jet, std::size_t first, JetBatch& adjoint)>;

struct GradientOptions {
  int chunk_size = 256;
  int threads = 1;
};

/// Value and exact parameter gradient of a point-separable objective.
/// inputs is input_dim x n; dirs lists the input coordinates whose derivatives the
/// objective consumes. Chunk partials are summed in chunk order, so the result is
/// bitwise independent of the thread count.
double objective_gradient(const Architecture& arch, const ParameterVector& params,
                          const Eigen::MatrixXd& inputs, std::span<const int> dirs,
                          const ChunkObjective& objective, Eigen::VectorXd& grad,
                          const GradientOptions& opts = {});

/// Jets without a gradient. Same chunking as objective_gradient.
JetBatch evaluate_batch(const Architecture& arch, const ParameterVector& params,
                        const Eigen::MatrixXd& inputs, std::span<const int> dirs,
                        const GradientOptions& opts = {});

/// Immutable trained network plus the scales it was trained with.
struct NetworkModel {
  Architecture arch;
  ParameterVector params;
  NormalizationRefs norm;

  Eigen::VectorXd operator()(std::span<const double> input) const {
    return forward(arch, params, input);
  }
};

std::string serialize_model(const NetworkModel& model);
NetworkModel deserialize_model(const std::string& document);
void save_model(const NetworkModel& model, const std::string& path);
NetworkModel load_model(const std::string& path);

}  // namespace pinc::net

#include "pinc/net.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "pinc/error.hpp"

namespace pinc::net {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::sinusoidal: return "sinusoidal";
    case Activation::swish: return "swish";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "sinusoidal") return Activation::sinusoidal;
  if (name == "swish") return Activation::swish;
  throw ConfigError("unknown activation '" + name + "'");
}

void Architecture::validate() const {
  if (input_dim < 1 || output_dim < 1 || n_layers < 1 || hidden_size < 1) {
    throw ConfigError("architecture dimensions must be positive");
  }
}

ParameterLayout::ParameterLayout(const Architecture& arch) {
  arch.validate();
  const int H = arch.hidden_size;
  auto add = [&](int layer, Role role, int rows, int cols) {
    blocks_.push_back(Block{layer, role, rows, cols, size_});
    size_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  };
  auto add_affine = [&](int layer, int rows, int cols) {
    add(layer, Role::weight, rows, cols);
    add(layer, Role::bias, rows, 1);
  };
  int n_activated = 0;
  if (arch.skip_connections) {
    add_affine(0, H, arch.input_dim);
    add_affine(1, H, arch.input_dim);
    add_affine(2, H, arch.input_dim);
    for (int k = 1; k < arch.n_layers; ++k) add_affine(2 + k, H, H);
    n_activated = arch.n_layers + 2;
  } else {
    add_affine(0, H, arch.input_dim);
    for (int k = 1; k < arch.n_layers; ++k) add_affine(k, H, H);
    n_activated = arch.n_layers;
  }
  n_affine_ = n_activated + 1;
  add_affine(n_activated, arch.output_dim, H);
  if (arch.activation == Activation::sinusoidal) {
    for (int l = 0; l < n_activated; ++l) {
      add(l, Role::act_sin, 1, 1);
      add(l, Role::act_cos, 1, 1);
    }
  }
}

const Block& ParameterLayout::block(int layer, Role role) const {
  for (const auto& b : blocks_) {
    if (b.layer == layer && b.role == role) return b;
  }
  throw DimensionError("no parameter block for layer " + std::to_string(layer));
}

std::size_t ParameterLayout::index(int layer, Role role, int row, int col) const {
  const Block& b = block(layer, role);
  if (row < 0 || row >= b.rows || col < 0 || col >= b.cols) {
    throw DimensionError("parameter index out of range");
  }
  return b.offset + static_cast<std::size_t>(row) * b.cols + col;
}

ParameterVector init_params(const Architecture& arch, std::uint64_t seed) {
  const ParameterLayout layout(arch);
  ParameterVector p = ParameterVector::Zero(static_cast<Eigen::Index>(layout.size()));
  std::mt19937_64 gen(seed);
  for (const auto& b : layout.blocks()) {
    if (b.role == Role::weight) {
      const double bound = std::sqrt(6.0 / (b.rows + b.cols));
      for (int i = 0; i < b.rows * b.cols; ++i) {
        const double unit = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        p[static_cast<Eigen::Index>(b.offset + i)] = (2.0 * unit - 1.0) * bound;
      }
    } else if (b.role == Role::act_sin) {
      p[static_cast<Eigen::Index>(b.offset)] = 1.0;
    }
  }
  return p;
}

namespace {

using Mat = Eigen::MatrixXd;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMajor>;
using Weights = Eigen::Map<RowMajor>;

// Jets are stored side by side: [value | tangent_0 | ... | tangent_{K-1}], n columns each.
struct LayerCache {
  Mat z;   // pre-activation jet
  Mat f1;  // phi'(z value)
  Mat f2;  // phi''(z value)
  Mat h;   // activation jet
};

struct Tape {
  Eigen::Index n = 0;
  int k = 0;
  Mat input;
  std::vector<LayerCache> act;  // activated layers in layout order
  std::vector<Mat> gate;        // skip only: A^1..A^{N_L}
};

class Engine {
 public:
  Engine(const Architecture& arch, const ParameterVector& params)
      : arch_(arch), layout_(arch), params_(params) {
    if (static_cast<std::size_t>(params.size()) != layout_.size()) {
      throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                           " entries, architecture needs " + std::to_string(layout_.size()));
    }
  }

  const ParameterLayout& layout() const { return layout_; }

  Mat forward(Tape& tape) const {
    if (arch_.skip_connections) return forward_skip(tape);
    return forward_plain(tape);
  }

  void backward(const Tape& tape, const Mat& y_bar, Eigen::VectorXd& grad) const {
    if (arch_.skip_connections) {
      backward_skip(tape, y_bar, grad);
    } else {
      backward_plain(tape, y_bar, grad);
    }
  }

 private:
  ConstWeights weight(int layer) const {
    const Block& b = layout_.block(layer, Role::weight);
    return ConstWeights(params_.data() + b.offset, b.rows, b.cols);
  }
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const {
    const Block& b = layout_.block(layer, Role::bias);
    return Eigen::Map<const Eigen::VectorXd>(params_.data() + b.offset, b.rows);
  }
  double act_param(int layer, Role role) const {
    return params_[static_cast<Eigen::Index>(layout_.block(layer, role).offset)];
  }

  Mat affine(int layer, const Mat& in, Eigen::Index n) const {
    Mat z = weight(layer) * in;
    z.leftCols(n).colwise() += bias(layer);
    return z;
  }

  void activate(int layer, LayerCache& c, Eigen::Index n, int k) const {
    const auto z = c.z.leftCols(n).array();
    c.h.resize(c.z.rows(), c.z.cols());
    switch (arch_.activation) {
      case Activation::tanh: {
        const Eigen::ArrayXXd t = z.tanh();
        c.h.leftCols(n) = t.matrix();
        c.f1 = (1.0 - t.square()).matrix();
        c.f2 = (-2.0 * t * c.f1.array()).matrix();
        break;
      }
      case Activation::swish: {
        const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z).exp());
        const Eigen::ArrayXXd ds = s * (1.0 - s);
        c.h.leftCols(n) = (z * s).matrix();
        c.f1 = (s + z * ds).matrix();
        c.f2 = (ds * (2.0 + z * (1.0 - 2.0 * s))).matrix();
        break;
      }
      case Activation::sinusoidal: {
        const double w1 = act_param(layer, Role::act_sin);
        const double w2 = act_param(layer, Role::act_cos);
        const Eigen::ArrayXXd sn = z.sin();
        const Eigen::ArrayXXd cs = z.cos();
        const Eigen::ArrayXXd f = w1 * sn + w2 * cs;
        c.h.leftCols(n) = f.matrix();
        c.f1 = (w1 * cs - w2 * sn).matrix();
        c.f2 = (-f).matrix();
        break;
      }
    }
    for (int d = 1; d <= k; ++d) {
      c.h.middleCols(d * n, n) = (c.f1.array() * c.z.middleCols(d * n, n).array()).matrix();
    }
  }

  // Maps the activation-jet adjoint to the pre-activation-jet adjoint.
  Mat activate_backward(int layer, const LayerCache& c, const Mat& h_bar, Eigen::Index n, int k,
                        Eigen::VectorXd& grad) const {
    Mat z_bar(h_bar.rows(), h_bar.cols());
    auto zv = z_bar.leftCols(n).array();
    zv = c.f1.array() * h_bar.leftCols(n).array();
    for (int d = 1; d <= k; ++d) {
      const auto ht = h_bar.middleCols(d * n, n).array();
      zv += c.f2.array() * c.z.middleCols(d * n, n).array() * ht;
      z_bar.middleCols(d * n, n) = (c.f1.array() * ht).matrix();
    }
    if (arch_.activation == Activation::sinusoidal) {
      const auto z = c.z.leftCols(n).array();
      const Eigen::ArrayXXd sn = z.sin();
      const Eigen::ArrayXXd cs = z.cos();
      double g1 = (h_bar.leftCols(n).array() * sn).sum();
      double g2 = (h_bar.leftCols(n).array() * cs).sum();
      for (int d = 1; d <= k; ++d) {
        const Eigen::ArrayXXd hz =
            h_bar.middleCols(d * n, n).array() * c.z.middleCols(d * n, n).array();
        g1 += (hz * cs).sum();
        g2 -= (hz * sn).sum();
      }
      grad[static_cast<Eigen::Index>(layout_.block(layer, Role::act_sin).offset)] += g1;
      grad[static_cast<Eigen::Index>(layout_.block(layer, Role::act_cos).offset)] += g2;
    }
    return z_bar;
  }

  // Accumulates dW, db and returns the adjoint of the affine input.
  Mat affine_backward(int layer, const Mat& in, const Mat& z_bar, Eigen::Index n,
                      Eigen::VectorXd& grad, bool need_input_adjoint) const {
    const Block& wb = layout_.block(layer, Role::weight);
    const Block& bb = layout_.block(layer, Role::bias);
    Weights gw(grad.data() + wb.offset, wb.rows, wb.cols);
    gw.noalias() += z_bar * in.transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + bb.offset, bb.rows) +=
        z_bar.leftCols(n).rowwise().sum();
    if (!need_input_adjoint) return Mat();
    return weight(layer).transpose() * z_bar;
  }

  Mat forward_plain(Tape& tape) const {
    const Eigen::Index n = tape.n;
    tape.act.resize(arch_.n_layers);
    const Mat* in = &tape.input;
    for (int l = 0; l < arch_.n_layers; ++l) {
      LayerCache& c = tape.act[l];
      c.z = affine(l, *in, n);
      activate(l, c, n, tape.k);
      in = &c.h;
    }
    return affine(arch_.n_layers, *in, n);
  }

  void backward_plain(const Tape& tape, const Mat& y_bar, Eigen::VectorXd& grad) const {
    const Eigen::Index n = tape.n;
    const int L = arch_.n_layers;
    Mat h_bar = affine_backward(L, tape.act[L - 1].h, y_bar, n, grad, true);
    for (int l = L - 1; l >= 0; --l) {
      const Mat z_bar = activate_backward(l, tape.act[l], h_bar, n, tape.k, grad);
      const Mat& in = l == 0 ? tape.input : tape.act[l - 1].h;
      h_bar = affine_backward(l, in, z_bar, n, grad, l > 0);
    }
  }

  // A = U + Z (V - U), applied blockwise on jets.
  static void gate(const Mat& u, const Mat& dvu, const Mat& z, Mat& a, Eigen::Index n, int k) {
    a.resize(u.rows(), u.cols());
    a.leftCols(n) = (u.leftCols(n).array() + z.leftCols(n).array() * dvu.leftCols(n).array())
                        .matrix();
    for (int d = 1; d <= k; ++d) {
      a.middleCols(d * n, n) =
          (u.middleCols(d * n, n).array() +
           z.middleCols(d * n, n).array() * dvu.leftCols(n).array() +
           z.leftCols(n).array() * dvu.middleCols(d * n, n).array())
              .matrix();
    }
  }

  Mat forward_skip(Tape& tape) const {
    const Eigen::Index n = tape.n;
    const int L = arch_.n_layers;
    tape.act.resize(L + 2);
    tape.gate.resize(L);
    for (int l = 0; l < 2; ++l) {
      tape.act[l].z = affine(l, tape.input, n);
      activate(l, tape.act[l], n, tape.k);
    }
    const Mat& u = tape.act[0].h;
    const Mat dvu = tape.act[1].h - u;
    for (int g = 0; g < L; ++g) {
      LayerCache& c = tape.act[2 + g];
      c.z = affine(2 + g, g == 0 ? tape.input : tape.gate[g - 1], n);
      activate(2 + g, c, n, tape.k);
      gate(u, dvu, c.h, tape.gate[g], n, tape.k);
    }
    return affine(L + 2, tape.gate[L - 1], n);
  }

  void backward_skip(const Tape& tape, const Mat& y_bar, Eigen::VectorXd& grad) const {
    const Eigen::Index n = tape.n;
    const int L = arch_.n_layers;
    const int k = tape.k;
    const Mat& u = tape.act[0].h;
    const Mat dvu = tape.act[1].h - u;
    Mat u_bar = Mat::Zero(u.rows(), u.cols());
    Mat d_bar = Mat::Zero(u.rows(), u.cols());
    Mat a_bar = affine_backward(L + 2, tape.gate[L - 1], y_bar, n, grad, true);
    for (int g = L - 1; g >= 0; --g) {
      const LayerCache& c = tape.act[2 + g];
      const Mat& z = c.h;
      Mat z_bar(z.rows(), z.cols());
      z_bar.leftCols(n) = (a_bar.leftCols(n).array() * dvu.leftCols(n).array()).matrix();
      d_bar.leftCols(n).array() += a_bar.leftCols(n).array() * z.leftCols(n).array();
      for (int d = 1; d <= k; ++d) {
        const auto at = a_bar.middleCols(d * n, n).array();
        z_bar.leftCols(n).array() += at * dvu.middleCols(d * n, n).array();
        z_bar.middleCols(d * n, n) = (at * dvu.leftCols(n).array()).matrix();
        d_bar.leftCols(n).array() += at * z.middleCols(d * n, n).array();
        d_bar.middleCols(d * n, n).array() += at * z.leftCols(n).array();
      }
      u_bar += a_bar;
      const Mat pre_bar = activate_backward(2 + g, c, z_bar, n, k, grad);
      const Mat& in = g == 0 ? tape.input : tape.gate[g - 1];
      a_bar = affine_backward(2 + g, in, pre_bar, n, grad, g > 0);
    }
    u_bar -= d_bar;
    const Mat zu_bar = activate_backward(0, tape.act[0], u_bar, n, k, grad);
    affine_backward(0, tape.input, zu_bar, n, grad, false);
    const Mat zv_bar = activate_backward(1, tape.act[1], d_bar, n, k, grad);
    affine_backward(1, tape.input, zv_bar, n, grad, false);
  }

  Architecture arch_;
  ParameterLayout layout_;
  const ParameterVector& params_;
};

Mat seed_input_jet(const Eigen::MatrixXd& inputs, Eigen::Index first, Eigen::Index n,
                   std::span<const int> dirs) {
  const int k = static_cast<int>(dirs.size());
  Mat x = Mat::Zero(inputs.rows(), (1 + k) * n);
  x.leftCols(n) = inputs.middleCols(first, n);
  for (int d = 0; d < k; ++d) x.block(dirs[d], (d + 1) * n, 1, n).setOnes();
  return x;
}

void check_dirs(const Architecture& arch, std::span<const int> dirs) {
  for (int d : dirs) {
    if (d < 0 || d >= arch.input_dim) throw DimensionError("derivative direction out of range");
  }
}

JetBatch split_jet(const Mat& y, Eigen::Index n, int k) {
  JetBatch jet;
  jet.value = y.leftCols(n);
  for (int d = 1; d <= k; ++d) jet.tangent.push_back(y.middleCols(d * n, n));
  return jet;
}

// Runs fn(chunk_index) for every chunk on up to `threads` workers.
template <class Fn>
void for_each_chunk(std::size_t n_chunks, int threads, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n_chunks, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = next++; c < n_chunks; c = next++) fn(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

double objective_gradient(const Architecture& arch, const ParameterVector& params,
                          const Eigen::MatrixXd& inputs, std::span<const int> dirs,
                          const ChunkObjective& objective, Eigen::VectorXd& grad,
                          const GradientOptions& opts) {
  const Engine engine(arch, params);
  if (inputs.rows() != arch.input_dim) throw DimensionError("batch rows != input_dim");
  check_dirs(arch, dirs);
  const int k = static_cast<int>(dirs.size());
  const Eigen::Index total = inputs.cols();
  const Eigen::Index cs = std::max(1, opts.chunk_size);
  const std::size_t n_chunks = static_cast<std::size_t>((total + cs - 1) / cs);
  grad = Eigen::VectorXd::Zero(params.size());
  if (n_chunks == 0) return 0.0;

  const bool buffered = opts.threads > 1 && n_chunks > 1;
  std::vector<Eigen::VectorXd> partial(buffered ? n_chunks : 1);
  std::vector<double> values(n_chunks, 0.0);

  auto run_chunk = [&](std::size_t c, Eigen::VectorXd& g) {
    const Eigen::Index first = static_cast<Eigen::Index>(c) * cs;
    const Eigen::Index n = std::min(cs, total - first);
    Tape tape;
    tape.n = n;
    tape.k = k;
    tape.input = seed_input_jet(inputs, first, n, dirs);
    const Mat y = engine.forward(tape);
    const JetBatch jet = split_jet(y, n, k);
    JetBatch adj;
    adj.value = Mat::Zero(jet.value.rows(), n);
    adj.tangent.assign(k, Mat::Zero(jet.value.rows(), n));
    values[c] = objective(jet, static_cast<std::size_t>(first), adj);
    Mat y_bar(y.rows(), y.cols());
    y_bar.leftCols(n) = adj.value;
    for (int d = 0; d < k; ++d) y_bar.middleCols((d + 1) * n, n) = adj.tangent[d];
    g = Eigen::VectorXd::Zero(params.size());
    engine.backward(tape, y_bar, g);
  };

  double value = 0.0;
  if (buffered) {
    for_each_chunk(n_chunks, opts.threads, [&](std::size_t c) { run_chunk(c, partial[c]); });
    for (std::size_t c = 0; c < n_chunks; ++c) {
      grad += partial[c];
      value += values[c];
    }
  } else {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      run_chunk(c, partial[0]);
      grad += partial[0];
      value += values[c];
    }
  }
  return value;
}

JetBatch evaluate_batch(const Architecture& arch, const ParameterVector& params,
                        const Eigen::MatrixXd& inputs, std::span<const int> dirs,
                        const GradientOptions& opts) {
  const Engine engine(arch, params);
  if (inputs.rows() != arch.input_dim) throw DimensionError("batch rows != input_dim");
  check_dirs(arch, dirs);
  const int k = static_cast<int>(dirs.size());
  const Eigen::Index total = inputs.cols();
  const Eigen::Index cs = std::max(1, opts.chunk_size);
  const std::size_t n_chunks = static_cast<std::size_t>((total + cs - 1) / cs);
  JetBatch out;
  out.value.resize(arch.output_dim, total);
  out.tangent.assign(k, Mat(arch.output_dim, total));
  for_each_chunk(n_chunks, opts.threads, [&](std::size_t c) {
    const Eigen::Index first = static_cast<Eigen::Index>(c) * cs;
    const Eigen::Index n = std::min(cs, total - first);
    Tape tape;
    tape.n = n;
    tape.k = k;
    tape.input = seed_input_jet(inputs, first, n, dirs);
    const Mat y = engine.forward(tape);
    out.value.middleCols(first, n) = y.leftCols(n);
    for (int d = 0; d < k; ++d) out.tangent[d].middleCols(first, n) = y.middleCols((d + 1) * n, n);
  });
  return out;
}

namespace {

Eigen::MatrixXd as_column(const Architecture& arch, std::span<const double> input) {
  if (static_cast<int>(input.size()) != arch.input_dim) {
    throw DimensionError("input has " + std::to_string(input.size()) + " entries, expected " +
                         std::to_string(arch.input_dim));
  }
  Eigen::MatrixXd x(arch.input_dim, 1);
  for (int i = 0; i < arch.input_dim; ++i) x(i, 0) = input[i];
  return x;
}

}  // namespace

Eigen::VectorXd forward(const Architecture& arch, const ParameterVector& params,
                        std::span<const double> input) {
  const JetBatch jet = evaluate_batch(arch, params, as_column(arch, input), {});
  return jet.value.col(0);
}

Eigen::VectorXd forward_plain(const Architecture& arch, const ParameterVector& params,
                              std::span<const double> input) {
  if (arch.skip_connections) throw ConfigError("forward_plain called on a skip architecture");
  return forward(arch, params, input);
}

Eigen::VectorXd forward_skip(const Architecture& arch, const ParameterVector& params,
                             std::span<const double> input) {
  if (!arch.skip_connections) throw ConfigError("forward_skip called on a plain architecture");
  return forward(arch, params, input);
}

EvalResult eval_with_input_derivatives(const Architecture& arch, const ParameterVector& params,
                                       std::span<const double> input) {
  std::vector<int> dirs(arch.input_dim);
  for (int d = 0; d < arch.input_dim; ++d) dirs[d] = d;
  const JetBatch jet = evaluate_batch(arch, params, as_column(arch, input), dirs);
  EvalResult r;
  r.output = jet.value.col(0);
  r.input_jacobian.resize(arch.output_dim, arch.input_dim);
  for (int d = 0; d < arch.input_dim; ++d) r.input_jacobian.col(d) = jet.tangent[d].col(0);
  return r;
}

}  // namespace pinc::net

#pragma once

#include "gridop/rng.hpp"
#include "gridop/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

namespace gridop {

enum class Activation { leaky_relu, tanh };
enum class Architecture { plain, modified_fc };

std::string_view to_string(Activation a);
std::string_view to_string(Architecture a);
Activation activation_from_string(std::string_view name);
Architecture architecture_from_string(std::string_view name);

struct NetworkSpec {
  Eigen::Index input_dim = 1;
  Eigen::Index output_dim = 1;
  std::vector<Eigen::Index> hidden_layers;
  Activation activation = Activation::leaky_relu;
  double leaky_slope = 0.01;
  Architecture architecture = Architecture::plain;

  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

/// Extent of one affine map W (rows x cols, column-major) followed by its bias inside the flat
/// parameter vector.
struct AffineBlock {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index offset = 0;

  [[nodiscard]] Eigen::Index weight_size() const { return rows * cols; }
  [[nodiscard]] Eigen::Index bias_offset() const { return offset + rows * cols; }
  [[nodiscard]] Eigen::Index end() const { return offset + rows * cols + rows; }
};

/// Block order: [encoder_u, encoder_v] (modified_fc with hidden layers only), hidden..., output.
struct ParameterLayout {
  std::vector<AffineBlock> blocks;
  bool has_encoders = false;
  Eigen::Index size = 0;

  static ParameterLayout for_spec(const NetworkSpec& spec);
  [[nodiscard]] const AffineBlock& output() const { return blocks.back(); }
  [[nodiscard]] const AffineBlock& hidden(std::size_t k) const {
    return blocks[k + (has_encoders ? 2 : 0)];
  }
};

/// Fully connected network evaluated column-wise on a batch (one sample per column).
/// Parameters live outside the network in a flat vector laid out by `layout()`.
template <typename Scalar>
class Mlp {
public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  /// Intermediate values kept by `forward` for `backward`.
  struct Tape {
    std::vector<Matrix> inputs;  // input to hidden layer k (inputs[0] is the network input)
    std::vector<Matrix> pre;     // pre-activation of hidden layer k
    std::vector<Matrix> gate;    // activated hidden layer k (the gate z for modified_fc)
    Matrix enc_u_pre, enc_v_pre, enc_u, enc_v;
    Matrix last_hidden;
  };

  Mlp() = default;
  explicit Mlp(NetworkSpec spec) : spec_(std::move(spec)), layout_(ParameterLayout::for_spec(spec_)) {}

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] const ParameterLayout& layout() const { return layout_; }
  [[nodiscard]] Eigen::Index parameter_count() const { return layout_.size; }

  /// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void initialize(Eigen::Ref<Vector> params, Rng& rng) const {
    check_params(params.size());
    for (const auto& b : layout_.blocks) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
      for (Eigen::Index i = b.offset; i < b.end(); ++i)
        params[i] = static_cast<Scalar>(uniform(rng, -bound, bound));
    }
  }

  Matrix forward(const Eigen::Ref<const Matrix>& input, const Eigen::Ref<const Vector>& params,
                 Tape* tape = nullptr) const {
    check_params(params.size());
    if (input.rows() != spec_.input_dim)
      throw Error("mlp: input dimension " + std::to_string(input.rows()) + ", expected " +
                  std::to_string(spec_.input_dim));
    const std::size_t depth = spec_.hidden_layers.size();
    if (tape) {
      tape->inputs.assign(depth, Matrix());
      tape->pre.assign(depth, Matrix());
      tape->gate.assign(depth, Matrix());
    }

    Matrix h = input;
    if (spec_.architecture == Architecture::modified_fc && layout_.has_encoders) {
      Matrix au = affine(layout_.blocks[0], params, input);
      Matrix av = affine(layout_.blocks[1], params, input);
      Matrix u = activate(au);
      Matrix v = activate(av);
      for (std::size_t k = 0; k < depth; ++k) {
        Matrix a = affine(layout_.hidden(k), params, h);
        Matrix z = activate(a);
        Matrix next = u + z.cwiseProduct(v - u);
        if (tape) {
          tape->inputs[k] = std::move(h);
          tape->pre[k] = std::move(a);
          tape->gate[k] = std::move(z);
        }
        h = std::move(next);
      }
      if (tape) {
        tape->enc_u_pre = std::move(au);
        tape->enc_v_pre = std::move(av);
        tape->enc_u = std::move(u);
        tape->enc_v = std::move(v);
      }
    } else {
      for (std::size_t k = 0; k < depth; ++k) {
        Matrix a = affine(layout_.hidden(k), params, h);
        Matrix z = activate(a);
        if (tape) {
          tape->inputs[k] = std::move(h);
          tape->pre[k] = std::move(a);
          tape->gate[k] = z;
        }
        h = std::move(z);
      }
    }
    Matrix out = affine(layout_.output(), params, h);
    if (tape) tape->last_hidden = std::move(h);
    return out;
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output). Optionally returns
  /// d(loss)/d(input).
  void backward(const Tape& tape, const Eigen::Ref<const Matrix>& grad_output,
                const Eigen::Ref<const Vector>& params, Eigen::Ref<Vector> grad,
                Matrix* grad_input = nullptr) const {
    check_params(params.size());
    check_params(grad.size());
    const std::size_t depth = spec_.hidden_layers.size();

    Matrix g_h = accumulate_affine(layout_.output(), params, grad, tape.last_hidden, grad_output);
    if (depth == 0) {
      if (grad_input) *grad_input = std::move(g_h);
      return;
    }

    if (spec_.architecture == Architecture::modified_fc && layout_.has_encoders) {
      const Matrix diff = tape.enc_v - tape.enc_u;
      Matrix g_u = Matrix::Zero(tape.enc_u.rows(), tape.enc_u.cols());
      Matrix g_v = Matrix::Zero(tape.enc_v.rows(), tape.enc_v.cols());
      for (std::size_t k = depth; k-- > 0;) {
        const Matrix& z = tape.gate[k];
        g_u.array() += g_h.array() * (Scalar(1) - z.array());
        g_v.array() += g_h.array() * z.array();
        Matrix g_a = (g_h.cwiseProduct(diff)).cwiseProduct(derivative(tape.pre[k]));
        g_h = accumulate_affine(layout_.hidden(k), params, grad, tape.inputs[k], g_a);
      }
      Matrix g_au = g_u.cwiseProduct(derivative(tape.enc_u_pre));
      Matrix g_av = g_v.cwiseProduct(derivative(tape.enc_v_pre));
      const Matrix& x = tape.inputs[0];
      g_h += accumulate_affine(layout_.blocks[0], params, grad, x, g_au);
      g_h += accumulate_affine(layout_.blocks[1], params, grad, x, g_av);
    } else {
      for (std::size_t k = depth; k-- > 0;) {
        Matrix g_a = g_h.cwiseProduct(derivative(tape.pre[k]));
        g_h = accumulate_affine(layout_.hidden(k), params, grad, tape.inputs[k], g_a);
      }
    }
    if (grad_input) *grad_input = std::move(g_h);
  }

private:
  void check_params(Eigen::Index n) const {
    if (n != layout_.size)
      throw Error("mlp: parameter vector has " + std::to_string(n) + " entries, layout needs " +
                  std::to_string(layout_.size));
  }

  static ConstMatrixMap weight(const AffineBlock& b, const Eigen::Ref<const Vector>& p) {
    return ConstMatrixMap(p.data() + b.offset, b.rows, b.cols);
  }
  static ConstVectorMap bias(const AffineBlock& b, const Eigen::Ref<const Vector>& p) {
    return ConstVectorMap(p.data() + b.bias_offset(), b.rows);
  }

  static Matrix affine(const AffineBlock& b, const Eigen::Ref<const Vector>& p, const Matrix& x) {
    Matrix out = weight(b, p) * x;
    out.colwise() += bias(b, p);
    return out;
  }

  /// Adds dW = g x^T and db = sum(g) into `grad`; returns W^T g.
  static Matrix accumulate_affine(const AffineBlock& b, const Eigen::Ref<const Vector>& p,
                                  Eigen::Ref<Vector> grad, const Matrix& x, const Matrix& g) {
    Eigen::Map<Matrix>(grad.data() + b.offset, b.rows, b.cols).noalias() += g * x.transpose();
    Eigen::Map<Vector>(grad.data() + b.bias_offset(), b.rows) += g.rowwise().sum();
    return weight(b, p).transpose() * g;
  }

  Matrix activate(const Matrix& a) const {
    if (spec_.activation == Activation::tanh) return a.array().tanh().matrix();
    const Scalar slope = static_cast<Scalar>(spec_.leaky_slope);
    return a.unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
  }

  Matrix derivative(const Matrix& a) const {
    if (spec_.activation == Activation::tanh)
      return (Scalar(1) - a.array().tanh().square()).matrix();
    const Scalar slope = static_cast<Scalar>(spec_.leaky_slope);
    return a.unaryExpr([slope](Scalar v) { return v > Scalar(0) ? Scalar(1) : slope; });
  }

  NetworkSpec spec_;
  ParameterLayout layout_;
};

}  // namespace gridop

#pragma once

// Forward and backward kernels for the layers used by the perception CNN and
// the reward MLP. Everything here is a pure function of its arguments.

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "xtamer/errors.hpp"
#include "xtamer/tensor.hpp"

namespace xtamer::nn {

inline constexpr double kNormEpsilon = 1e-8;

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

template <typename Scalar>
void check_conv_shapes(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                       const Tensor<Scalar>& bias) {
  require(input.rank() == 3, "conv2d: input must be CxHxW, got " + shape_string(input.shape()));
  require(kernels.rank() == 4,
          "conv2d: kernels must be OxCxKxK, got " + shape_string(kernels.shape()));
  require(kernels.dim(1) == input.dim(0),
          "conv2d: kernel channels " + shape_string(kernels.shape()) + " vs input " +
              shape_string(input.shape()));
  require(kernels.dim(2) == kernels.dim(3), "conv2d: kernels must be square");
  require(kernels.dim(2) <= input.dim(1) && kernels.dim(3) <= input.dim(2),
          "conv2d: kernel " + shape_string(kernels.shape()) + " larger than input " +
              shape_string(input.shape()));
  require(bias.rank() == 1 && bias.dim(0) == kernels.dim(0),
          "conv2d: bias " + shape_string(bias.shape()) + " vs kernels " +
              shape_string(kernels.shape()));
}

/// Unfolds every KxK patch into a column: rows are (c, ki, kj), columns are
/// output positions in row-major order.
template <typename Scalar>
typename Tensor<Scalar>::RowMajorMatrix im2col(const Tensor<Scalar>& input, Index k) {
  const Index channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const Index out_h = height - k + 1, out_w = width - k + 1;
  typename Tensor<Scalar>::RowMajorMatrix cols(channels * k * k, out_h * out_w);
  const Scalar* src = input.data().data();
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        Scalar* row = cols.row((c * k + ki) * k + kj).data();
        for (Index oh = 0; oh < out_h; ++oh) {
          const Scalar* line = src + (c * height + oh + ki) * width + kj;
          std::copy(line, line + out_w, row + oh * out_w);
        }
      }
    }
  }
  return cols;
}

template <typename Scalar, typename Derived>
Tensor<Scalar> col2im(const Eigen::MatrixBase<Derived>& cols, const Shape& input_shape, Index k) {
  Tensor<Scalar> out(input_shape);
  const Index channels = input_shape[0], height = input_shape[1], width = input_shape[2];
  const Index out_h = height - k + 1, out_w = width - k + 1;
  Scalar* dst = out.data().data();
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const Index r = (c * k + ki) * k + kj;
        for (Index oh = 0; oh < out_h; ++oh) {
          Scalar* line = dst + (c * height + oh + ki) * width + kj;
          for (Index ow = 0; ow < out_w; ++ow) line[ow] += cols(r, oh * out_w + ow);
        }
      }
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (valid, stride 1)

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                              const Tensor<Scalar>& bias) {
  detail::check_conv_shapes(input, kernels, bias);
  const Index out_c = kernels.dim(0), k = kernels.dim(2);
  const Index out_h = input.dim(1) - k + 1, out_w = input.dim(2) - k + 1;
  const auto cols = detail::im2col(input, k);
  const auto weights = kernels.matrix(out_c, kernels.size() / out_c);

  Tensor<Scalar> out({out_c, out_h, out_w});
  auto result = out.matrix(out_c, out_h * out_w);
  result.noalias() = weights * cols;
  result.colwise() += bias.data();
  return out;
}

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernels;
  Tensor<Scalar> bias;
};

/// `need_input` = false skips the input gradient (first layer of a network).
template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& kernels,
                                    const Tensor<Scalar>& grad_out, bool need_input = true) {
  const Index out_c = kernels.dim(0), k = kernels.dim(2);
  const Index out_h = input.dim(1) - k + 1, out_w = input.dim(2) - k + 1;
  detail::require(grad_out.shape() == Shape{out_c, out_h, out_w},
                  "conv2d_backward: upstream gradient " + shape_string(grad_out.shape()));
  const auto cols = detail::im2col(input, k);
  const auto upstream = grad_out.matrix(out_c, out_h * out_w);
  const auto weights = kernels.matrix(out_c, kernels.size() / out_c);

  Conv2dGrads<Scalar> g;
  g.kernels = Tensor<Scalar>(kernels.shape());
  g.kernels.matrix(out_c, kernels.size() / out_c).noalias() = upstream * cols.transpose();
  g.bias = Tensor<Scalar>({out_c}, upstream.rowwise().sum());
  if (need_input) {
    typename Tensor<Scalar>::RowMajorMatrix grad_cols = weights.transpose() * upstream;
    g.input = detail::col2im<Scalar>(grad_cols, input.shape(), k);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Max pooling (window == stride)

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input index of each output cell's maximum
};

template <typename Scalar>
PoolResult<Scalar> maxpool2d(const Tensor<Scalar>& input, Index window = 2) {
  detail::require(input.rank() == 3, "maxpool2d: input must be CxHxW");
  detail::require(window >= 1, "maxpool2d: window must be positive");
  const Index channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  detail::require(height % window == 0 && width % window == 0,
                  "maxpool2d: extents " + shape_string(input.shape()) +
                      " not divisible by window " + std::to_string(window));
  const Index out_h = height / window, out_w = width / window;
  PoolResult<Scalar> r{Tensor<Scalar>({channels, out_h, out_w}),
                       std::vector<Index>(std::size_t(channels * out_h * out_w))};
  Index o = 0;
  for (Index c = 0; c < channels; ++c) {
    for (Index oh = 0; oh < out_h; ++oh) {
      for (Index ow = 0; ow < out_w; ++ow, ++o) {
        Index best = (c * height + oh * window) * width + ow * window;
        for (Index i = 0; i < window; ++i) {
          for (Index j = 0; j < window; ++j) {
            const Index idx = (c * height + oh * window + i) * width + ow * window + j;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[std::size_t(o)] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const std::vector<Index>& argmax, const Shape& input_shape,
                                  const Tensor<Scalar>& grad_out) {
  detail::require(Index(argmax.size()) == grad_out.size(),
                  "maxpool2d_backward: argmax/gradient size mismatch");
  Tensor<Scalar> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[Index(i)];
  return g;
}

// ---------------------------------------------------------------------------
// Activations

enum class ActivationKind { linear, tanh, relu, scaled_tanh };

template <typename Scalar>
struct ActivationSpec {
  ActivationKind kind = ActivationKind::linear;
  Scalar scale = Scalar(1);

  static ActivationSpec linear() { return {ActivationKind::linear, Scalar(1)}; }
  static ActivationSpec tanh() { return {ActivationKind::tanh, Scalar(1)}; }
  static ActivationSpec relu() { return {ActivationKind::relu, Scalar(1)}; }
  static ActivationSpec scaled_tanh(Scalar s) { return {ActivationKind::scaled_tanh, s}; }

  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

template <typename Scalar>
Tensor<Scalar> activate(const ActivationSpec<Scalar>& spec, const Tensor<Scalar>& pre) {
  Tensor<Scalar> out = pre;
  auto a = out.data().array();
  switch (spec.kind) {
    case ActivationKind::linear: break;
    case ActivationKind::tanh: a = a.tanh(); break;
    case ActivationKind::relu: a = a.max(Scalar(0)); break;
    case ActivationKind::scaled_tanh: a = spec.scale * a.tanh(); break;
  }
  return out;
}

/// Gradient w.r.t. the pre-activation, given the forward output `post`.
template <typename Scalar>
Tensor<Scalar> activation_backward(const ActivationSpec<Scalar>& spec, const Tensor<Scalar>& pre,
                                   const Tensor<Scalar>& post, const Tensor<Scalar>& grad_out) {
  Tensor<Scalar> g = grad_out;
  auto a = g.data().array();
  switch (spec.kind) {
    case ActivationKind::linear: break;
    case ActivationKind::tanh: a *= Scalar(1) - post.data().array().square(); break;
    case ActivationKind::relu: a *= (pre.data().array() > Scalar(0)).template cast<Scalar>(); break;
    case ActivationKind::scaled_tanh:
      a *= spec.scale * (Scalar(1) - (post.data().array() / spec.scale).square());
      break;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dense layer

template <typename Scalar>
void check_dense_shapes(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                        const Tensor<Scalar>& bias) {
  detail::require(weights.rank() == 2, "dense: weights must be m x n");
  detail::require(weights.dim(1) == input.size(),
                  "dense: weights " + shape_string(weights.shape()) + " vs input of " +
                      std::to_string(input.size()) + " values");
  detail::require(bias.rank() == 1 && bias.dim(0) == weights.dim(0),
                  "dense: bias " + shape_string(bias.shape()) + " vs weights " +
                      shape_string(weights.shape()));
}

/// Affine map W*x + b without the activation.
template <typename Scalar>
Tensor<Scalar> dense_affine(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                            const Tensor<Scalar>& bias) {
  check_dense_shapes(input, weights, bias);
  const Index m = weights.dim(0), n = weights.dim(1);
  Tensor<Scalar> out({m});
  out.data().noalias() = weights.matrix(m, n) * input.data();
  out.data() += bias.data();
  return out;
}

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                             const Tensor<Scalar>& bias, const ActivationSpec<Scalar>& activation) {
  return activate(activation, dense_affine(input, weights, bias));
}

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

/// `grad_pre` is the gradient w.r.t. the affine output (activation already
/// folded in by the caller).
template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weights,
                                  const Tensor<Scalar>& grad_pre) {
  const Index m = weights.dim(0), n = weights.dim(1);
  detail::require(grad_pre.size() == m, "dense_backward: upstream gradient size");
  DenseGrads<Scalar> g;
  g.weights = Tensor<Scalar>(weights.shape());
  g.weights.matrix(m, n).noalias() = grad_pre.data() * input.data().transpose();
  g.bias = Tensor<Scalar>({m}, grad_pre.data());
  g.input = Tensor<Scalar>(input.shape());
  g.input.data().noalias() = weights.matrix(m, n).transpose() * grad_pre.data();
  return g;
}

// ---------------------------------------------------------------------------
// Whole-tensor normalizations: v / (||v|| + eps)

template <typename Scalar>
Tensor<Scalar> l1_normalize(const Tensor<Scalar>& v) {
  const Scalar denom = v.data().template lpNorm<1>() + Scalar(kNormEpsilon);
  return Tensor<Scalar>(v.shape(), v.data() / denom);
}

template <typename Scalar>
Tensor<Scalar> l2_normalize(const Tensor<Scalar>& v) {
  const Scalar denom = v.data().norm() + Scalar(kNormEpsilon);
  return Tensor<Scalar>(v.shape(), v.data() / denom);
}

template <typename Scalar>
Tensor<Scalar> l1_normalize_backward(const Tensor<Scalar>& v, const Tensor<Scalar>& grad_out) {
  const Scalar s = v.data().template lpNorm<1>() + Scalar(kNormEpsilon);
  const Scalar gv = grad_out.data().dot(v.data());
  typename Tensor<Scalar>::Vector g =
      grad_out.data() / s - v.data().cwiseSign() * (gv / (s * s));
  return Tensor<Scalar>(v.shape(), std::move(g));
}

template <typename Scalar>
Tensor<Scalar> l2_normalize_backward(const Tensor<Scalar>& v, const Tensor<Scalar>& grad_out) {
  const Scalar norm = v.data().norm();
  const Scalar s = norm + Scalar(kNormEpsilon);
  typename Tensor<Scalar>::Vector g = grad_out.data() / s;
  if (norm > Scalar(0)) g -= v.data() * (grad_out.data().dot(v.data()) / (s * s * norm));
  return Tensor<Scalar>(v.shape(), std::move(g));
}

}  // namespace xtamer::nn

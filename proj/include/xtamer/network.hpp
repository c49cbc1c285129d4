#pragma once

// A sequential layer stack with an explicit forward cache, reverse-mode
// gradients, and plain SGD. The network object itself is never mutated by
// forward/backward, so a trained network can be shared across threads.

#include <stdexcept>
#include <type_traits>
#include <variant>
#include <vector>

#include "xtamer/layers.hpp"
#include "xtamer/tensor.hpp"

namespace xtamer::nn {

template <typename Scalar>
struct Conv2d {
  Tensor<Scalar> kernels;  // O x C x K x K
  Tensor<Scalar> bias;     // O
};

struct MaxPool2d {
  Index window = 2;
};

template <typename Scalar>
struct Dense {
  Tensor<Scalar> weights;  // m x n
  Tensor<Scalar> bias;     // m
  ActivationSpec<Scalar> activation = ActivationSpec<Scalar>::linear();
};

template <typename Scalar>
struct Activation {
  ActivationSpec<Scalar> spec;
};

struct L1Normalize {};

/// Fixed multiplicative gain (no parameters).
template <typename Scalar>
struct Scale {
  Scalar factor = Scalar(1);
};
struct L2Normalize {};
struct Flatten {};

template <typename Scalar>
using Layer = std::variant<Conv2d<Scalar>, MaxPool2d, Dense<Scalar>, Activation<Scalar>,
                           L1Normalize, L2Normalize, Flatten, Scale<Scalar>>;

/// Intermediates from one forward pass. `inputs[i]` is the input of layer i;
/// `inputs.back()` is the network output.
template <typename Scalar>
struct ForwardCache {
  std::vector<Tensor<Scalar>> inputs;
  std::vector<Tensor<Scalar>> pre_activation;  // Dense layers only
  std::vector<std::vector<Index>> argmax;      // MaxPool2d layers only

  bool empty() const noexcept { return inputs.empty(); }
  const Tensor<Scalar>& output() const { return inputs.back(); }
};

/// Gradients in `Network::parameters()` order plus the input gradient.
template <typename Scalar>
struct Grads {
  std::vector<Tensor<Scalar>> params;
  Tensor<Scalar> input;

  Grads& operator+=(const Grads& other) {
    if (params.empty()) {
      params = other.params;
      return *this;
    }
    if (params.size() != other.params.size()) throw ShapeError("Grads: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i].data() += other.params[i].data();
    return *this;
  }

  Grads& operator*=(Scalar s) {
    for (auto& p : params) p.data() *= s;
    return *this;
  }

  bool all_finite() const {
    for (const auto& p : params)
      if (!p.all_finite()) return false;
    return true;
  }
};

template <typename Scalar>
class Network {
 public:
  using LayerType = Layer<Scalar>;

  Network() = default;
  explicit Network(std::vector<LayerType> layers) : layers_(std::move(layers)) {}

  void add(LayerType layer) { layers_.push_back(std::move(layer)); }

  std::vector<LayerType>& layers() noexcept { return layers_; }
  const std::vector<LayerType>& layers() const noexcept { return layers_; }

  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& layer : layers_) {
      std::visit(
          [&](auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Conv2d<Scalar>>) {
              out.push_back(&l.kernels);
              out.push_back(&l.bias);
            } else if constexpr (std::is_same_v<L, Dense<Scalar>>) {
              out.push_back(&l.weights);
              out.push_back(&l.bias);
            }
          },
          layer);
    }
    return out;
  }

  std::vector<const Tensor<Scalar>*> parameters() const {
    auto mut = const_cast<Network*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  ForwardCache<Scalar> forward(const Tensor<Scalar>& input) const {
    ForwardCache<Scalar> cache;
    const std::size_t n = layers_.size();
    cache.inputs.reserve(n + 1);
    cache.pre_activation.resize(n);
    cache.argmax.resize(n);
    cache.inputs.push_back(input);
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor<Scalar>& x = cache.inputs.back();
      Tensor<Scalar> y = std::visit(
          [&](const auto& l) -> Tensor<Scalar> {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Conv2d<Scalar>>) {
              return conv2d_forward(x, l.kernels, l.bias);
            } else if constexpr (std::is_same_v<L, MaxPool2d>) {
              auto r = maxpool2d(x, l.window);
              cache.argmax[i] = std::move(r.argmax);
              return std::move(r.output);
            } else if constexpr (std::is_same_v<L, Dense<Scalar>>) {
              cache.pre_activation[i] = dense_affine(x, l.weights, l.bias);
              return activate(l.activation, cache.pre_activation[i]);
            } else if constexpr (std::is_same_v<L, Activation<Scalar>>) {
              return activate(l.spec, x);
            } else if constexpr (std::is_same_v<L, L1Normalize>) {
              return l1_normalize(x);
            } else if constexpr (std::is_same_v<L, L2Normalize>) {
              return l2_normalize(x);
            } else if constexpr (std::is_same_v<L, Scale<Scalar>>) {
              return Tensor<Scalar>(x.shape(), x.data() * l.factor);
            } else {
              return x.reshaped({x.size()});
            }
          },
          layers_[i]);
      cache.inputs.push_back(std::move(y));
    }
    return cache;
  }

  Tensor<Scalar> predict(const Tensor<Scalar>& input) const { return forward(input).output(); }

 private:
  std::vector<LayerType> layers_;
};

/// Reverse-mode pass over a cached forward run. `upstream` is dLoss/dOutput.
template <typename Scalar>
Grads<Scalar> backward(const Network<Scalar>& net, const ForwardCache<Scalar>& cache,
                       const Tensor<Scalar>& upstream, bool need_input_grad = true) {
  const auto& layers = net.layers();
  if (cache.empty()) throw std::logic_error("backward called before forward");
  if (cache.inputs.size() != layers.size() + 1)
    throw std::logic_error("forward cache does not belong to this network");
  if (upstream.shape() != cache.output().shape())
    throw ShapeError("backward: upstream gradient " + shape_string(upstream.shape()) +
                     " vs output " + shape_string(cache.output().shape()));

  std::vector<std::vector<Tensor<Scalar>>> per_layer(layers.size());
  Tensor<Scalar> grad = upstream;
  for (std::size_t ii = layers.size(); ii-- > 0;) {
    const Tensor<Scalar>& x = cache.inputs[ii];
    const Tensor<Scalar>& y = cache.inputs[ii + 1];
    const bool want_input = need_input_grad || ii > 0;
    grad = std::visit(
        [&](const auto& l) -> Tensor<Scalar> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2d<Scalar>>) {
            auto g = conv2d_backward(x, l.kernels, grad, want_input);
            per_layer[ii] = {std::move(g.kernels), std::move(g.bias)};
            return std::move(g.input);
          } else if constexpr (std::is_same_v<L, MaxPool2d>) {
            return maxpool2d_backward(cache.argmax[ii], x.shape(), grad);
          } else if constexpr (std::is_same_v<L, Dense<Scalar>>) {
            auto g_pre = activation_backward(l.activation, cache.pre_activation[ii], y, grad);
            auto g = dense_backward(x, l.weights, g_pre);
            per_layer[ii] = {std::move(g.weights), std::move(g.bias)};
            return std::move(g.input);
          } else if constexpr (std::is_same_v<L, Activation<Scalar>>) {
            return activation_backward(l.spec, x, y, grad);
          } else if constexpr (std::is_same_v<L, L1Normalize>) {
            return l1_normalize_backward(x, grad);
          } else if constexpr (std::is_same_v<L, L2Normalize>) {
            return l2_normalize_backward(x, grad);
          } else if constexpr (std::is_same_v<L, Scale<Scalar>>) {
            return Tensor<Scalar>(grad.shape(), grad.data() * l.factor);
          } else {
            return grad.reshaped(x.shape());
          }
        },
        layers[ii]);
  }

  Grads<Scalar> out;
  for (auto& g : per_layer)
    for (auto& t : g) out.params.push_back(std::move(t));
  out.input = std::move(grad);
  return out;
}

/// p <- p - lr * g. Returns false (and leaves every parameter untouched)
/// when any gradient is non-finite.
template <typename Scalar>
[[nodiscard]] bool sgd_step(const std::vector<Tensor<Scalar>*>& params,
                            const std::vector<Tensor<Scalar>>& grads, Scalar learning_rate) {
  if (!(learning_rate >= Scalar(0))) throw std::invalid_argument("sgd_step: negative learning rate");
  if (params.size() != grads.size()) throw ShapeError("sgd_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape())
      throw ShapeError("sgd_step: gradient " + shape_string(grads[i].shape()) + " vs parameter " +
                       shape_string(params[i]->shape()));
    if (!grads[i].all_finite()) return false;
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->data() -= learning_rate * grads[i].data();
  return true;
}

template <typename Scalar>
[[nodiscard]] bool sgd_step(Network<Scalar>& net, const Grads<Scalar>& grads, Scalar learning_rate) {
  return sgd_step(net.parameters(), grads.params, learning_rate);
}

/// All parameters concatenated in `parameters()` order.
template <typename Scalar>
typename Tensor<Scalar>::Vector flatten_parameters(const Network<Scalar>& net) {
  typename Tensor<Scalar>::Vector out(net.parameter_count());
  Index at = 0;
  for (const auto* p : net.parameters()) {
    out.segment(at, p->size()) = p->data();
    at += p->size();
  }
  return out;
}

template <typename Scalar>
void assign_parameters(Network<Scalar>& net, const typename Tensor<Scalar>::Vector& flat) {
  if (flat.size() != net.parameter_count())
    throw ShapeError("assign_parameters: expected " + std::to_string(net.parameter_count()) +
                     " values, got " + std::to_string(flat.size()));
  Index at = 0;
  for (auto* p : net.parameters()) {
    p->data() = flat.segment(at, p->size());
    at += p->size();
  }
}

}  // namespace xtamer::nn

#ifndef JSAFE_NN_LAYERS_HPP
#define JSAFE_NN_LAYERS_HPP

#include <cmath>
#include <random>
#include <string>

#include "jsafe/nn/tensor.hpp"

namespace jsafe::nn {

/// y = x W^T + b, with W stored out x in and b as a 1 x out row.
template <class S>
struct Linear {
  Param<S> weight;
  Param<S> bias;

  Linear() = default;
  Linear(const std::string& name, int in, int out) : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}
  Linear(const std::string& name, int in, int out, std::mt19937_64& rng) : Linear(name, in, out) {
    init_fan_in(weight.value, in, rng);
    init_fan_in(bias.value, in, rng);
  }

  int in_features() const { return static_cast<int>(weight.value.cols()); }
  int out_features() const { return static_cast<int>(weight.value.rows()); }
  ParamList<S> parameters() { return {&weight, &bias}; }
};

template <class S>
struct LinearGrads {
  Tensor<S> input;
  Tensor<S> weight;
  Tensor<S> bias;
};

template <class S>
Tensor<S> linear_forward(const Linear<S>& layer, const Tensor<S>& x) {
  require_shape(x.cols() == layer.in_features(), "linear_forward: input width does not match layer");
  Tensor<S> y = x * layer.weight.value.transpose();
  y.rowwise() += layer.bias.value.row(0);
  return y;
}

template <class S>
LinearGrads<S> linear_backward(const Linear<S>& layer, const Tensor<S>& x, const Tensor<S>& dy) {
  require_shape(x.cols() == layer.in_features(), "linear_backward: input width does not match layer");
  require_shape(dy.cols() == layer.out_features() && dy.rows() == x.rows(),
                "linear_backward: upstream gradient shape mismatch");
  LinearGrads<S> g;
  g.input = dy * layer.weight.value;
  g.weight = dy.transpose() * x;
  g.bias = dy.colwise().sum();
  return g;
}

/// Adds parameter gradients into the layer and returns the input gradient.
template <class S>
Tensor<S> linear_accumulate(Linear<S>& layer, const Tensor<S>& x, const Tensor<S>& dy) {
  LinearGrads<S> g = linear_backward(layer, x, dy);
  layer.weight.grad += g.weight;
  layer.bias.grad += g.bias;
  return std::move(g.input);
}

template <class S>
Tensor<S> relu_forward(const Tensor<S>& x) {
  return x.cwiseMax(S(0));
}

/// Subgradient 0 at exactly 0.
template <class S>
Tensor<S> relu_backward(const Tensor<S>& x, const Tensor<S>& dy) {
  require_shape(x.rows() == dy.rows() && x.cols() == dy.cols(), "relu_backward: shape mismatch");
  return (x.array() > S(0)).select(dy, S(0));
}

template <class S>
struct LayerNorm {
  Param<S> gain;
  Param<S> offset;
  double epsilon = 1e-5;

  LayerNorm() = default;
  LayerNorm(const std::string& name, int width, double eps = 1e-5)
      : gain(name + ".gain", 1, width), offset(name + ".offset", 1, width), epsilon(eps) {
    if (!(eps > 0.0)) throw ContractViolation("layer norm epsilon must be positive");
    gain.value.setOnes();
  }

  int width() const { return static_cast<int>(gain.value.cols()); }
  ParamList<S> parameters() { return {&gain, &offset}; }
};

template <class S>
struct LayerNormCache {
  Tensor<S> normalized;               // before gain/offset
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std;
};

template <class S>
struct LayerNormGrads {
  Tensor<S> input;
  Tensor<S> gain;
  Tensor<S> offset;
};

/// Per row: (x - mean) / sqrt(var + eps), then gain and offset.
template <class S>
Tensor<S> layer_norm_forward(const LayerNorm<S>& ln, const Tensor<S>& x, LayerNormCache<S>* cache = nullptr) {
  require_shape(x.cols() == ln.width(), "layer_norm_forward: row width does not match");
  const Eigen::Index d = x.cols();
  Tensor<S> xhat(x.rows(), d);
  Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S mean = x.row(r).sum() / S(d);
    const auto centered = (x.row(r).array() - mean).matrix();
    const S var = centered.squaredNorm() / S(d);
    inv_std(r) = S(1) / std::sqrt(var + S(ln.epsilon));
    xhat.row(r) = centered * inv_std(r);
  }
  Tensor<S> y = (xhat.array().rowwise() * ln.gain.value.row(0).array()).matrix();
  y.rowwise() += ln.offset.value.row(0);
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <class S>
LayerNormGrads<S> layer_norm_backward(const LayerNorm<S>& ln, const LayerNormCache<S>& cache, const Tensor<S>& dy) {
  const Tensor<S>& xhat = cache.normalized;
  require_shape(dy.rows() == xhat.rows() && dy.cols() == xhat.cols(), "layer_norm_backward: shape mismatch");
  const S d = S(xhat.cols());
  LayerNormGrads<S> g;
  g.gain = (dy.array() * xhat.array()).colwise().sum().matrix();
  g.offset = dy.colwise().sum();
  const Tensor<S> dxhat = (dy.array().rowwise() * ln.gain.value.row(0).array()).matrix();
  g.input.resize(xhat.rows(), xhat.cols());
  for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
    const S sum_d = dxhat.row(r).sum();
    const S sum_dx = dxhat.row(r).dot(xhat.row(r));
    g.input.row(r) = (cache.inv_std(r) / d) *
                     (d * dxhat.row(r).array() - sum_d - xhat.row(r).array() * sum_dx).matrix();
  }
  return g;
}

}  // namespace jsafe::nn

#endif  // JSAFE_NN_LAYERS_HPP

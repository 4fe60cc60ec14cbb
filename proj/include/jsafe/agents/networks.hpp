#ifndef JSAFE_AGENTS_NETWORKS_HPP
#define JSAFE_AGENTS_NETWORKS_HPP

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "jsafe/nn/attention.hpp"
#include "jsafe/nn/layers.hpp"
#include "jsafe/traffic/observation.hpp"

namespace jsafe {

using nn::Param;
using nn::ParamList;
using nn::QueryMode;
using nn::Tensor;

/// Linear layers with ReLU between them (and after the last one when
/// `relu_output`).
template <class S>
struct Mlp {
  std::vector<nn::Linear<S>> layers;
  bool relu_output = false;

  struct Cache {
    std::vector<Tensor<S>> inputs;  // input of each linear layer
    Tensor<S> last_pre;             // pre-activation of the final layer
  };

  Mlp() = default;
  Mlp(const std::string& name, int in, const std::vector<int>& sizes, bool relu_last, std::mt19937_64& rng)
      : relu_output(relu_last) {
    int prev = in;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      layers.emplace_back(name + "." + std::to_string(i), prev, sizes[i], rng);
      prev = sizes[i];
    }
  }

  int in_features() const { return layers.front().in_features(); }
  int out_features() const { return layers.back().out_features(); }

  ParamList<S> parameters() {
    ParamList<S> p;
    for (auto& l : layers)
      for (Param<S>* x : l.parameters()) p.push_back(x);
    return p;
  }

  Tensor<S> forward(const Tensor<S>& x, Cache& c) const {
    c.inputs.clear();
    Tensor<S> h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      c.inputs.push_back(h);
      Tensor<S> pre = nn::linear_forward(layers[i], h);
      const bool last = i + 1 == layers.size();
      if (last) {
        c.last_pre = pre;
        h = relu_output ? nn::relu_forward(pre) : std::move(pre);
      } else {
        h = nn::relu_forward(pre);
      }
    }
    return h;
  }

  Tensor<S> backward(const Cache& c, const Tensor<S>& dy) {
    Tensor<S> d = relu_output ? nn::relu_backward(c.last_pre, dy) : dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
      d = nn::linear_accumulate(layers[i], c.inputs[i], d);
      // The input of layer i is relu(pre_{i-1}); relu'(pre) == (relu(pre) > 0).
      if (i > 0) d = nn::relu_backward(c.inputs[i], d);
    }
    return d;
  }
};

/// Copies an observation batch into one (batch * V) x 7 matrix.
template <class S>
Tensor<S> stack_observations(const std::vector<const ObservationMatrix*>& batch) {
  if (batch.empty()) throw ContractViolation("empty observation batch");
  const Eigen::Index v = batch.front()->rows();
  Tensor<S> out(static_cast<Eigen::Index>(batch.size()) * v, kFeatureCount);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch[b]->rows() != v) throw ContractViolation("observation batch with mixed vehicle counts");
    out.middleRows(static_cast<Eigen::Index>(b) * v, v) = batch[b]->template cast<S>();
  }
  return out;
}

template <class S>
Tensor<S> stack_observations(const ObservationMatrix& one) {
  return stack_observations<S>(std::vector<const ObservationMatrix*>{&one});
}

/// Maps stacked observations (batch * V rows) to `outputs()` values per sample.
template <class S>
class Network {
 public:
  virtual ~Network() = default;
  virtual Tensor<S> forward(const Tensor<S>& rows, int vehicles) = 0;
  /// Gradient of the loss w.r.t. the last forward's output; accumulates
  /// into parameter gradients.
  virtual void backward(const Tensor<S>& d_output) = 0;
  virtual ParamList<S> parameters() = 0;
  virtual int outputs() const = 0;
  virtual std::unique_ptr<Network<S>> clone() const = 0;
  virtual nlohmann::json describe() const = 0;
  /// heads x V ego-query weights of sample `b` from the last forward, or an
  /// empty tensor for networks without attention.
  virtual Tensor<S> attention_weights(int /*b*/) const { return {}; }
};

struct MlpSpec {
  int vehicles = 15;
  int outputs = 3;
  std::vector<int> hidden = {128, 128};
};

/// Baseline: the flattened V x 7 observation through an MLP.
template <class S>
class MlpNetwork final : public Network<S> {
 public:
  MlpNetwork(const MlpSpec& spec, std::mt19937_64& rng) : spec_(spec) {
    std::vector<int> sizes = spec.hidden;
    sizes.push_back(spec.outputs);
    mlp_ = Mlp<S>("mlp", spec.vehicles * kFeatureCount, sizes, false, rng);
  }

  Tensor<S> forward(const Tensor<S>& rows, int vehicles) override {
    nn::require_shape(vehicles == spec_.vehicles && rows.cols() == kFeatureCount && rows.rows() % vehicles == 0,
                      "mlp network: observation shape");
    const Eigen::Index batch = rows.rows() / vehicles;
    Tensor<S> flat = Eigen::Map<const Tensor<S>>(rows.data(), batch, vehicles * kFeatureCount);
    return mlp_.forward(flat, cache_);
  }

  void backward(const Tensor<S>& d_output) override { mlp_.backward(cache_, d_output); }
  ParamList<S> parameters() override { return mlp_.parameters(); }
  int outputs() const override { return spec_.outputs; }
  std::unique_ptr<Network<S>> clone() const override { return std::make_unique<MlpNetwork<S>>(*this); }

  nlohmann::json describe() const override {
    return {{"architecture", "mlp"}, {"vehicles", spec_.vehicles}, {"outputs", spec_.outputs}, {"hidden", spec_.hidden}};
  }

 private:
  MlpSpec spec_;
  Mlp<S> mlp_;
  typename Mlp<S>::Cache cache_;
};

struct AttentionSpec {
  int vehicles = 15;
  int outputs = 3;
  std::vector<int> encoder = {64, 64};  // last entry is the model width
  int heads = 2;
  int d_k = 32;
  std::vector<int> head = {64};
  QueryMode mode = QueryMode::kSingle;

  int width() const { return encoder.back(); }
};

/// Ego and other rows go through separate encoders, the ego embedding
/// queries all present vehicles (presence feature > 0.5), the attention
/// output is added to the ego embedding, layer-normalised and mapped to
/// the outputs by an MLP.
template <class S>
class AttentionNetwork final : public Network<S> {
 public:
  AttentionNetwork(const AttentionSpec& spec, std::mt19937_64& rng) : spec_(spec) {
    if (spec.encoder.empty()) throw ContractViolation("attention network needs an encoder");
    ego_encoder_ = Mlp<S>("ego_encoder", kFeatureCount, spec.encoder, true, rng);
    other_encoder_ = Mlp<S>("other_encoder", kFeatureCount, spec.encoder, true, rng);
    attention_ = nn::MultiHeadAttention<S>("attention", spec.width(), spec.heads, spec.d_k, spec.mode, rng);
    norm_ = nn::LayerNorm<S>("norm", spec.width());
    std::vector<int> sizes = spec.head;
    sizes.push_back(spec.outputs);
    head_ = Mlp<S>("head", spec.width(), sizes, false, rng);
  }

  const AttentionSpec& spec() const { return spec_; }
  nn::MultiHeadAttention<S>& attention() { return attention_; }
  Mlp<S>& ego_encoder() { return ego_encoder_; }
  Mlp<S>& other_encoder() { return other_encoder_; }
  Mlp<S>& head() { return head_; }
  nn::LayerNorm<S>& norm() { return norm_; }

  Tensor<S> forward(const Tensor<S>& rows, int vehicles) override {
    nn::require_shape(vehicles == spec_.vehicles && rows.cols() == kFeatureCount && rows.rows() % vehicles == 0,
                      "attention network: observation shape");
    const Eigen::Index v = vehicles;
    const Eigen::Index batch = rows.rows() / v;
    batch_ = static_cast<int>(batch);
    Tensor<S> ego_rows(batch, kFeatureCount);
    Tensor<S> other_rows(batch * (v - 1), kFeatureCount);
    mask_.assign(static_cast<std::size_t>(batch * v), false);
    for (Eigen::Index b = 0; b < batch; ++b) {
      ego_rows.row(b) = rows.row(b * v);
      mask_[static_cast<std::size_t>(b * v)] = true;
      for (Eigen::Index j = 1; j < v; ++j) {
        other_rows.row(b * (v - 1) + j - 1) = rows.row(b * v + j);
        mask_[static_cast<std::size_t>(b * v + j)] = rows(b * v + j, feature::kPresence) > S(0.5);
      }
    }
    ego_embedding_ = ego_encoder_.forward(ego_rows, ego_cache_);
    const Tensor<S> other_embedding =
        v > 1 ? other_encoder_.forward(other_rows, other_cache_) : Tensor<S>(0, spec_.width());
    Tensor<S> all(batch * v, spec_.width());
    for (Eigen::Index b = 0; b < batch; ++b) {
      all.row(b * v) = ego_embedding_.row(b);
      if (v > 1) all.middleRows(b * v + 1, v - 1) = other_embedding.middleRows(b * (v - 1), v - 1);
    }
    const Tensor<S> attended = nn::multi_head_forward(attention_, all, vehicles, mask_, attention_cache_);
    const Tensor<S> combined = attended + ego_embedding_;
    const Tensor<S> normed = nn::layer_norm_forward(norm_, combined, &norm_cache_);
    return head_.forward(normed, head_cache_);
  }

  void backward(const Tensor<S>& d_output) override {
    const Tensor<S> d_normed = head_.backward(head_cache_, d_output);
    const nn::LayerNormGrads<S> g = nn::layer_norm_backward(norm_, norm_cache_, d_normed);
    norm_.gain.grad += g.gain;
    norm_.offset.grad += g.offset;
    const Tensor<S> d_all = nn::multi_head_backward(attention_, attention_cache_, g.input);
    const Eigen::Index v = spec_.vehicles;
    Tensor<S> d_ego = g.input;
    Tensor<S> d_other(batch_ * (v - 1), spec_.width());
    for (Eigen::Index b = 0; b < batch_; ++b) {
      d_ego.row(b) += d_all.row(b * v);
      if (v > 1) d_other.middleRows(b * (v - 1), v - 1) = d_all.middleRows(b * v + 1, v - 1);
    }
    ego_encoder_.backward(ego_cache_, d_ego);
    if (v > 1) other_encoder_.backward(other_cache_, d_other);
  }

  ParamList<S> parameters() override {
    ParamList<S> p;
    auto add = [&](ParamList<S> xs) { p.insert(p.end(), xs.begin(), xs.end()); };
    add(ego_encoder_.parameters());
    add(other_encoder_.parameters());
    add(attention_.parameters());
    add(norm_.parameters());
    add(head_.parameters());
    return p;
  }

  int outputs() const override { return spec_.outputs; }
  std::unique_ptr<Network<S>> clone() const override { return std::make_unique<AttentionNetwork<S>>(*this); }

  nlohmann::json describe() const override {
    return {{"architecture", "attention"}, {"vehicles", spec_.vehicles}, {"outputs", spec_.outputs},
            {"encoder", spec_.encoder},    {"width", spec_.width()},       {"heads", spec_.heads},
            {"d_k", spec_.d_k},            {"head", spec_.head},           {"query_mode", nn::to_string(spec_.mode)}};
  }

  Tensor<S> attention_weights(int b) const override { return nn::ego_attention_weights(attention_, attention_cache_, b); }

 private:
  AttentionSpec spec_;
  Mlp<S> ego_encoder_, other_encoder_, head_;
  nn::MultiHeadAttention<S> attention_;
  nn::LayerNorm<S> norm_;

  int batch_ = 0;
  std::vector<bool> mask_;
  Tensor<S> ego_embedding_;
  typename Mlp<S>::Cache ego_cache_, other_cache_, head_cache_;
  nn::MultiHeadCache<S> attention_cache_;
  nn::LayerNormCache<S> norm_cache_;
};

}  // namespace jsafe

#endif  // JSAFE_AGENTS_NETWORKS_HPP

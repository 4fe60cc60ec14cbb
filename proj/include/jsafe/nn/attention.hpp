#ifndef JSAFE_NN_ATTENTION_HPP
#define JSAFE_NN_ATTENTION_HPP

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "jsafe/nn/layers.hpp"

namespace jsafe::nn {

template <class S>
struct AttentionResult {
  Tensor<S> output;   // rows(Q) x cols(V)
  Tensor<S> weights;  // rows(Q) x rows(K)
};

/// softmax(Q K^T / sqrt(d_k)) V. Keys with `mask[j] == false` get weight 0.
template <class S>
AttentionResult<S> attention_forward(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v, int d_k,
                                     std::span<const bool> mask = {}) {
  if (d_k <= 0) throw ContractViolation("attention: d_k must be positive");
  require_shape(q.cols() == d_k && k.cols() == d_k, "attention: query/key width must equal d_k");
  require_shape(k.rows() == v.rows(), "attention: key and value row counts differ");
  require_shape(mask.empty() || mask.size() == static_cast<std::size_t>(k.rows()), "attention: mask length");
  bool any = mask.empty() && k.rows() > 0;
  for (bool m : mask) any = any || m;
  if (!any) throw ContractViolation("attention: no unmasked keys");

  const S scale = S(1) / std::sqrt(S(d_k));
  AttentionResult<S> r;
  r.weights = (q * k.transpose()) * scale;
  for (Eigen::Index i = 0; i < r.weights.rows(); ++i) {
    S mx = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < r.weights.cols(); ++j)
      if (mask.empty() || mask[static_cast<std::size_t>(j)]) mx = std::max(mx, r.weights(i, j));
    S total = 0;
    for (Eigen::Index j = 0; j < r.weights.cols(); ++j) {
      const bool on = mask.empty() || mask[static_cast<std::size_t>(j)];
      const S e = on ? std::exp(r.weights(i, j) - mx) : S(0);
      r.weights(i, j) = e;
      total += e;
    }
    r.weights.row(i) /= total;
  }
  r.output = r.weights * v;
  return r;
}

template <class S>
struct AttentionGrads {
  Tensor<S> q, k, v;
};

template <class S>
AttentionGrads<S> attention_backward(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                                     const Tensor<S>& weights, const Tensor<S>& d_output, int d_k) {
  const S scale = S(1) / std::sqrt(S(d_k));
  AttentionGrads<S> g;
  g.v = weights.transpose() * d_output;
  const Tensor<S> dw = d_output * v.transpose();
  Tensor<S> dlogits(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    const S dot = dw.row(i).dot(weights.row(i));
    dlogits.row(i) = (weights.row(i).array() * (dw.row(i).array() - dot)).matrix();
  }
  dlogits *= scale;
  g.q = dlogits * k;
  g.k = dlogits.transpose() * q;
  return g;
}

enum class QueryMode { kSingle, kMulti };

inline std::string to_string(QueryMode m) { return m == QueryMode::kSingle ? "single" : "multi"; }

inline QueryMode parse_query_mode(const std::string& s) {
  if (s == "single") return QueryMode::kSingle;
  if (s == "multi") return QueryMode::kMulti;
  throw std::invalid_argument("unknown query mode '" + s + "'");
}

/// Two-head attention over the vehicles of each sample. Heads use disjoint
/// column blocks of the shared q/k/v projections. In single mode only the
/// ego (row 0 of each sample) queries; in multi mode every present vehicle
/// queries and the per-query outputs are averaged before the output
/// projection, so with the ego alone both modes coincide.
template <class S>
struct MultiHeadAttention {
  int heads = 2;
  int d_k = 32;
  QueryMode mode = QueryMode::kSingle;
  Linear<S> query, key, value, output;

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int width, int head_count, int key_dim, QueryMode m,
                     std::mt19937_64& rng)
      : heads(head_count),
        d_k(key_dim),
        mode(m),
        query(name + ".query", width, head_count * key_dim, rng),
        key(name + ".key", width, head_count * key_dim, rng),
        value(name + ".value", width, head_count * key_dim, rng),
        output(name + ".output", head_count * key_dim, width, rng) {
    if (head_count * key_dim != width) throw ContractViolation("heads * d_k must equal the model width");
  }

  int width() const { return output.out_features(); }
  ParamList<S> parameters() {
    ParamList<S> p;
    for (Linear<S>* l : {&query, &key, &value, &output})
      for (Param<S>* x : l->parameters()) p.push_back(x);
    return p;
  }
};

template <class S>
struct MultiHeadCache {
  int batch = 0;
  int vehicles = 0;
  Tensor<S> input;      // (batch * vehicles) x width
  Tensor<S> q, k, v;    // (batch * vehicles) x heads*d_k
  Tensor<S> combined;   // batch x heads*d_k, input of the output projection
  std::vector<std::vector<int>> queries;  // per sample, rows that query
  std::vector<std::vector<int>> present;  // per sample, unmasked rows
  std::vector<Tensor<S>> weights;         // per sample and head: queries x present
};

/// `embeddings` holds `vehicles` consecutive rows per sample, ego first.
/// `mask` is batch*vehicles long; the ego row must be present.
template <class S>
Tensor<S> multi_head_forward(const MultiHeadAttention<S>& mha, const Tensor<S>& embeddings, int vehicles,
                             const std::vector<bool>& mask, MultiHeadCache<S>& cache) {
  require_shape(vehicles > 0 && embeddings.rows() % vehicles == 0, "multi_head_forward: row count");
  require_shape(embeddings.cols() == mha.width(), "multi_head_forward: embedding width");
  require_shape(mask.size() == static_cast<std::size_t>(embeddings.rows()), "multi_head_forward: mask length");
  const int batch = static_cast<int>(embeddings.rows() / vehicles);
  cache.batch = batch;
  cache.vehicles = vehicles;
  cache.input = embeddings;
  cache.q = linear_forward(mha.query, embeddings);
  cache.k = linear_forward(mha.key, embeddings);
  cache.v = linear_forward(mha.value, embeddings);
  cache.combined = Tensor<S>::Zero(batch, mha.heads * mha.d_k);
  cache.queries.assign(static_cast<std::size_t>(batch), {});
  cache.present.assign(static_cast<std::size_t>(batch), {});
  cache.weights.assign(static_cast<std::size_t>(batch * mha.heads), {});

  for (int b = 0; b < batch; ++b) {
    const int base = b * vehicles;
    if (!mask[static_cast<std::size_t>(base)]) throw ContractViolation("multi_head_forward: ego row is masked");
    auto& present = cache.present[static_cast<std::size_t>(b)];
    for (int j = 0; j < vehicles; ++j)
      if (mask[static_cast<std::size_t>(base + j)]) present.push_back(j);
    auto& queries = cache.queries[static_cast<std::size_t>(b)];
    if (mha.mode == QueryMode::kSingle)
      queries = {0};
    else
      queries = present;
    const auto np = static_cast<Eigen::Index>(present.size());
    const auto nq = static_cast<Eigen::Index>(queries.size());
    for (int h = 0; h < mha.heads; ++h) {
      const Eigen::Index c0 = h * mha.d_k;
      Tensor<S> qh(nq, mha.d_k), kh(np, mha.d_k), vh(np, mha.d_k);
      for (Eigen::Index i = 0; i < nq; ++i) qh.row(i) = cache.q.block(base + queries[i], c0, 1, mha.d_k);
      for (Eigen::Index j = 0; j < np; ++j) {
        kh.row(j) = cache.k.block(base + present[j], c0, 1, mha.d_k);
        vh.row(j) = cache.v.block(base + present[j], c0, 1, mha.d_k);
      }
      AttentionResult<S> r = attention_forward(qh, kh, vh, mha.d_k);
      cache.combined.block(b, c0, 1, mha.d_k) = r.output.colwise().sum() / S(nq);
      cache.weights[static_cast<std::size_t>(b * mha.heads + h)] = std::move(r.weights);
    }
  }
  return linear_forward(mha.output, cache.combined);
}

/// Accumulates parameter gradients; returns the gradient w.r.t. embeddings.
template <class S>
Tensor<S> multi_head_backward(MultiHeadAttention<S>& mha, const MultiHeadCache<S>& cache, const Tensor<S>& d_out) {
  const Tensor<S> d_combined = linear_accumulate(mha.output, cache.combined, d_out);
  Tensor<S> dq = Tensor<S>::Zero(cache.q.rows(), cache.q.cols());
  Tensor<S> dk = Tensor<S>::Zero(cache.k.rows(), cache.k.cols());
  Tensor<S> dv = Tensor<S>::Zero(cache.v.rows(), cache.v.cols());
  for (int b = 0; b < cache.batch; ++b) {
    const int base = b * cache.vehicles;
    const auto& present = cache.present[static_cast<std::size_t>(b)];
    const auto& queries = cache.queries[static_cast<std::size_t>(b)];
    const auto np = static_cast<Eigen::Index>(present.size());
    const auto nq = static_cast<Eigen::Index>(queries.size());
    for (int h = 0; h < mha.heads; ++h) {
      const Eigen::Index c0 = h * mha.d_k;
      Tensor<S> qh(nq, mha.d_k), kh(np, mha.d_k), vh(np, mha.d_k);
      for (Eigen::Index i = 0; i < nq; ++i) qh.row(i) = cache.q.block(base + queries[i], c0, 1, mha.d_k);
      for (Eigen::Index j = 0; j < np; ++j) {
        kh.row(j) = cache.k.block(base + present[j], c0, 1, mha.d_k);
        vh.row(j) = cache.v.block(base + present[j], c0, 1, mha.d_k);
      }
      Tensor<S> d_head(nq, mha.d_k);
      d_head.rowwise() = d_combined.block(b, c0, 1, mha.d_k).row(0) / S(nq);
      const AttentionGrads<S> g =
          attention_backward(qh, kh, vh, cache.weights[static_cast<std::size_t>(b * mha.heads + h)], d_head, mha.d_k);
      for (Eigen::Index i = 0; i < nq; ++i) dq.block(base + queries[i], c0, 1, mha.d_k) += g.q.row(i);
      for (Eigen::Index j = 0; j < np; ++j) {
        dk.block(base + present[j], c0, 1, mha.d_k) += g.k.row(j);
        dv.block(base + present[j], c0, 1, mha.d_k) += g.v.row(j);
      }
    }
  }
  Tensor<S> d_in = linear_accumulate(mha.query, cache.input, dq);
  d_in += linear_accumulate(mha.key, cache.input, dk);
  d_in += linear_accumulate(mha.value, cache.input, dv);
  return d_in;
}

/// Attention of the ego query over all `vehicles` slots of sample `b`, one
/// row per head; masked slots get 0.
template <class S>
Tensor<S> ego_attention_weights(const MultiHeadAttention<S>& mha, const MultiHeadCache<S>& cache, int b) {
  Tensor<S> w = Tensor<S>::Zero(mha.heads, cache.vehicles);
  const auto& present = cache.present[static_cast<std::size_t>(b)];
  for (int h = 0; h < mha.heads; ++h) {
    const Tensor<S>& wh = cache.weights[static_cast<std::size_t>(b * mha.heads + h)];
    for (std::size_t j = 0; j < present.size(); ++j) w(h, present[j]) = wh(0, static_cast<Eigen::Index>(j));
  }
  return w;
}

}  // namespace jsafe::nn

#endif  // JSAFE_NN_ATTENTION_HPP

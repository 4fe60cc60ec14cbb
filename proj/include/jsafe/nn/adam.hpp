#ifndef JSAFE_NN_ADAM_HPP
#define JSAFE_NN_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "jsafe/nn/tensor.hpp"

namespace jsafe::nn {

template <class S>
struct AdamState {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor<S>> first_moment;
  std::vector<Tensor<S>> second_moment;
  bool skipped_last = false;

  AdamState() = default;
  explicit AdamState(const ParamList<S>& params, double lr = 5e-4) : learning_rate(lr) { reset(params); }

  void reset(const ParamList<S>& params) {
    step = 0;
    first_moment.clear();
    second_moment.clear();
    for (const Param<S>* p : params) {
      first_moment.push_back(Tensor<S>::Zero(p->value.rows(), p->value.cols()));
      second_moment.push_back(Tensor<S>::Zero(p->value.rows(), p->value.cols()));
    }
  }
};

/// One bias-corrected Adam update from the accumulated gradients. Returns
/// false and leaves everything untouched if any gradient is non-finite.
template <class S>
bool adam_step(AdamState<S>& st, const ParamList<S>& params) {
  require_shape(st.first_moment.size() == params.size(), "adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(st.first_moment[i].rows() == params[i]->grad.rows() &&
                      st.first_moment[i].cols() == params[i]->grad.cols(),
                  "adam_step: moment shape does not match parameter");
    if (!params[i]->grad.allFinite()) {
      st.skipped_last = true;
      return false;
    }
  }
  st.skipped_last = false;
  ++st.step;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const S b1 = S(st.beta1), b2 = S(st.beta2);
  const S step_size = S(st.learning_rate / c1);
  const S inv_c2 = S(1.0 / c2);
  const S eps = S(st.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = st.first_moment[i].array();
    auto v = st.second_moment[i].array();
    const auto g = params[i]->grad.array();
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.square();
    params[i]->value.array() -= step_size * m / ((v * inv_c2).sqrt() + eps);
  }
  return true;
}

/// Rescales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
template <class S>
double clip_grad_norm(const ParamList<S>& params, double max_norm) {
  double sq = 0.0;
  for (const Param<S>* p : params) sq += static_cast<double>(p->grad.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const S f = S(max_norm / norm);
    for (Param<S>* p : params) p->grad *= f;
  }
  return norm;
}

}  // namespace jsafe::nn

#endif  // JSAFE_NN_ADAM_HPP

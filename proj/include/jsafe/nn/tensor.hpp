#ifndef JSAFE_NN_TENSOR_HPP
#define JSAFE_NN_TENSOR_HPP

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "jsafe/errors.hpp"

namespace jsafe::nn {

/// Dense row-major matrix. Tests run in double, training in float.
template <class S>
using Tensor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor and its accumulated gradient.
template <class S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Tensor<S>::Zero(rows, cols)), grad(Tensor<S>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <class S>
using ParamList = std::vector<Param<S>*>;

template <class S>
void zero_grads(const ParamList<S>& params) {
  for (Param<S>* p : params) p->zero_grad();
}

template <class S>
bool all_finite(const Tensor<S>& t) {
  return t.allFinite();
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class S>
void init_fan_in(Tensor<S>& t, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(u(rng));
}

/// Copies values of `src` into `dst` parameter by parameter. Shapes must match.
template <class S>
void copy_values(const ParamList<S>& dst, const ParamList<S>& src) {
  if (dst.size() != src.size()) throw ContractViolation("parameter lists differ in length");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.rows() != src[i]->value.rows() || dst[i]->value.cols() != src[i]->value.cols())
      throw ContractViolation("parameter '" + dst[i]->name + "' shape mismatch");
    dst[i]->value = src[i]->value;
  }
}

template <class S>
std::size_t parameter_count(const ParamList<S>& params) {
  std::size_t n = 0;
  for (const Param<S>* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

inline void require_shape(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace jsafe::nn

#endif  // JSAFE_NN_TENSOR_HPP

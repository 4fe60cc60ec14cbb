#ifndef JSAFE_NN_GRAD_CHECK_HPP
#define JSAFE_NN_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "jsafe/nn/tensor.hpp"

namespace jsafe::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares the analytic gradient of a scalar loss with central differences
/// for every entry of every parameter.
///
/// `loss` evaluates the loss at the current parameter values. `analytic`
/// must leave d(loss)/d(param) in each `grad` (it is called once, after the
/// grads are zeroed). The relative error of an entry is
/// |a - n| / max(|a|, |n|, floor).
inline GradCheckResult grad_check(const ParamList<double>& params, const std::function<double()>& loss,
                                  const std::function<void()>& analytic, double epsilon = 1e-6, double floor = 1e-3) {
  zero_grads(params);
  analytic();
  GradCheckResult out;
  for (Param<double>* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + epsilon;
      const double up = loss();
      x = saved - epsilon;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = p->grad.data()[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.checked;
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace jsafe::nn

#endif  // JSAFE_NN_GRAD_CHECK_HPP

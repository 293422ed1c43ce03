#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "msnn/tensor.hpp"

namespace msnn {

/// Compare reverse-mode gradients of a scalar-valued function against central
/// finite differences. Returns the maximum over all input components of
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// The function must be pure: it is re-evaluated many times.
inline double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn, std::vector<Tensor> inputs,
                         double epsilon = 1e-4) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Tensor loss = fn(inputs);
  if (loss.size() != 1) throw InvalidArgument("grad_check: function must return a scalar");
  backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  const auto eval = [&]() {
    NoGradGuard guard;
    return fn(inputs).item();
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    double* data = inputs[k].data();
    for (std::int64_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = data[i];
      data[i] = saved + epsilon;
      const double up = eval();
      data[i] = saved - epsilon;
      const double down = eval();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[k][static_cast<std::size_t>(i)];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace msnn

#ifndef LVE_NEURAL_PARAM_HPP
#define LVE_NEURAL_PARAM_HPP

#include <algorithm>
#include <string>

#include "lve/neural/tensor.hpp"

namespace lve::nn {

/// A trainable tensor with its gradient and RMSprop accumulator.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> accum;

  Param() = default;
  Param(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), accum(value.shape()) {}

  void zero_grad() { grad.fill(T(0)); }

  void clip(T bound) {
    for (auto& v : value.values()) v = std::clamp(v, -bound, bound);
  }
};

}  // namespace lve::nn

#endif  // LVE_NEURAL_PARAM_HPP

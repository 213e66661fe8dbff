#ifndef LVE_NEURAL_RMSPROP_HPP
#define LVE_NEURAL_RMSPROP_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "lve/neural/param.hpp"

namespace lve::nn {

struct RmsPropConfig {
  double lr = 0.00005;
  double decay = 0.99;
  double eps = 1e-8;
};

/// accum <- decay*accum + (1-decay)*g^2;  w <- w - lr*g/sqrt(accum + eps)
template <typename T>
void rmsprop_step(Param<T>& p, const RmsPropConfig& cfg) {
  const T lr = static_cast<T>(cfg.lr);
  const T decay = static_cast<T>(cfg.decay);
  const T eps = static_cast<T>(cfg.eps);
  T* w = p.value.data();
  T* a = p.accum.data();
  const T* g = p.grad.data();
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    a[i] = decay * a[i] + (T(1) - decay) * g[i] * g[i];
    w[i] -= lr * g[i] / std::sqrt(a[i] + eps);
  }
}

template <typename T>
void rmsprop_step(std::span<Param<T>* const> params, const RmsPropConfig& cfg) {
  for (Param<T>* p : params) rmsprop_step(*p, cfg);
}

}  // namespace lve::nn

#endif  // LVE_NEURAL_RMSPROP_HPP

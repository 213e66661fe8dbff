#ifndef LVE_NEURAL_TENSOR_HPP
#define LVE_NEURAL_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lve/error.hpp"

namespace lve::nn {

struct Shape {
  int n = 0;
  int c = 0;
  int h = 1;
  int w = 1;

  std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense NCHW tensor with contiguous row-major storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.size()) throw ShapeMismatch("value count does not match shape " + shape_.str());
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  T& operator()(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  T operator()(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  /// Sample `n` as a contiguous span of c*h*w values.
  std::span<const T> sample(int n) const {
    const std::size_t len = static_cast<std::size_t>(shape_.c) * shape_.plane();
    return {data_.data() + n * len, len};
  }
  std::span<T> sample(int n) {
    const std::size_t len = static_cast<std::size_t>(shape_.c) * shape_.plane();
    return {data_.data() + n * len, len};
  }

  /// Same storage reinterpreted with a new shape of equal size.
  Tensor reshaped(Shape s) const& {
    if (s.size() != size()) throw ShapeMismatch("cannot reshape " + shape_.str() + " to " + s.str());
    return Tensor(s, data_);
  }
  Tensor reshaped(Shape s) && {
    if (s.size() != size()) throw ShapeMismatch("cannot reshape " + shape_.str() + " to " + s.str());
    shape_ = s;
    return std::move(*this);
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeMismatch("dot: " + a.shape().str() + " vs " + b.shape().str());
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T, typename Rng>
void fill_normal(Tensor<T>& t, Rng& rng, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

}  // namespace lve::nn

#endif  // LVE_NEURAL_TENSOR_HPP

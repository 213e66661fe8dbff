#ifndef LVE_NEURAL_LAYERS_HPP
#define LVE_NEURAL_LAYERS_HPP

// Forward and backward passes for the handful of layers the level GAN uses.
// Convolutions lower to im2col + one GEMM per call; the reduction order is
// fixed, so results are bit-stable run to run.

#include <Eigen/Core>

#include <cmath>
#include <type_traits>
#include <vector>

#include "lve/neural/param.hpp"
#include "lve/neural/tensor.hpp"

namespace lve::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  int kernel = 4;
  int stride = 2;
  int pad = 1;

  int conv_out(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
  int transpose_out(int in) const { return (in - 1) * stride - 2 * pad + kernel; }
};

namespace detail {

// Unfold a batch of images (N, C, H, W) into columns of shape
// (C*k*k, N*Ho*Wo); column index = n*Ho*Wo + oy*Wo + ox.
template <typename T>
void im2col(const T* x, int n, int c, int h, int w, ConvGeometry g, int ho, int wo, T* col) {
  const int k = g.kernel;
  const std::size_t cols = static_cast<std::size_t>(n) * ho * wo;
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * cols;
        for (int b = 0; b < n; ++b) {
          const T* img = x + (static_cast<std::size_t>(b) * c + ch) * h * w;
          T* out = row + static_cast<std::size_t>(b) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= h) {
              for (int ox = 0; ox < wo; ++ox) out[oy * wo + ox] = T(0);
              continue;
            }
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              out[oy * wo + ox] = (ix >= 0 && ix < w) ? img[iy * w + ix] : T(0);
            }
          }
        }
      }
}

// Adjoint of im2col: scatter-add columns back into a zeroed image batch.
template <typename T>
void col2im(const T* col, int n, int c, int h, int w, ConvGeometry g, int ho, int wo, T* x) {
  const int k = g.kernel;
  const std::size_t cols = static_cast<std::size_t>(n) * ho * wo;
  std::fill(x, x + static_cast<std::size_t>(n) * c * h * w, T(0));
  for (int ch = 0; ch < c; ++ch)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + ((static_cast<std::size_t>(ch) * k + ky) * k + kx) * cols;
        for (int b = 0; b < n; ++b) {
          T* img = x + (static_cast<std::size_t>(b) * c + ch) * h * w;
          const T* in = row + static_cast<std::size_t>(b) * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < w) img[iy * w + ix] += in[oy * wo + ox];
            }
          }
        }
      }
}

// (N, C, P) <-> (C, N*P) layout changes around the batched GEMM.
template <typename T>
void nchw_to_cm(const T* x, int n, int c, std::size_t p, T* out) {
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(x + (static_cast<std::size_t>(b) * c + ch) * p, p,
                  out + static_cast<std::size_t>(ch) * n * p + b * p);
}

template <typename T>
void cm_to_nchw(const T* x, int n, int c, std::size_t p, T* out) {
  for (int b = 0; b < n; ++b)
    for (int ch = 0; ch < c; ++ch)
      std::copy_n(x + static_cast<std::size_t>(ch) * n * p + b * p, p,
                  out + (static_cast<std::size_t>(b) * c + ch) * p);
}

}  // namespace detail

/// Cross-correlation. Weight shape is (Cout, Cin, k, k).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, ConvGeometry g) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != g.kernel || ws.w != g.kernel)
    throw ShapeMismatch("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  const int ho = g.conv_out(xs.h);
  const int wo = g.conv_out(xs.w);
  if (ho < 1 || wo < 1) throw ShapeMismatch("conv2d: input " + xs.str() + " too small for kernel");

  const int kk = xs.c * g.kernel * g.kernel;
  const std::size_t cols = static_cast<std::size_t>(xs.n) * ho * wo;
  std::vector<T> col(kk * cols);
  detail::im2col(x.data(), xs.n, xs.c, xs.h, xs.w, g, ho, wo, col.data());

  std::vector<T> ycm(static_cast<std::size_t>(ws.n) * cols);
  MatrixMap<T>(ycm.data(), ws.n, cols).noalias() =
      ConstMatrixMap<T>(weight.data(), ws.n, kk) * ConstMatrixMap<T>(col.data(), kk, cols);

  Tensor<T> y(Shape{xs.n, ws.n, ho, wo});
  detail::cm_to_nchw(ycm.data(), xs.n, ws.n, static_cast<std::size_t>(ho) * wo, y.data());
  return y;
}

/// Gradients of conv2d. Either output pointer may be null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, ConvGeometry g, const Tensor<T>& dy,
                     std::type_identity_t<Tensor<T>>* dx, std::type_identity_t<Tensor<T>>* dweight) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int ho = dy.shape().h;
  const int wo = dy.shape().w;
  const int kk = xs.c * g.kernel * g.kernel;
  const std::size_t cols = static_cast<std::size_t>(xs.n) * ho * wo;

  std::vector<T> dycm(static_cast<std::size_t>(ws.n) * cols);
  detail::nchw_to_cm(dy.data(), xs.n, ws.n, static_cast<std::size_t>(ho) * wo, dycm.data());
  ConstMatrixMap<T> dym(dycm.data(), ws.n, cols);

  if (dweight) {
    std::vector<T> col(kk * cols);
    detail::im2col(x.data(), xs.n, xs.c, xs.h, xs.w, g, ho, wo, col.data());
    *dweight = Tensor<T>(ws);
    MatrixMap<T>(dweight->data(), ws.n, kk).noalias() =
        dym * ConstMatrixMap<T>(col.data(), kk, cols).transpose();
  }
  if (dx) {
    std::vector<T> dcol(kk * cols);
    MatrixMap<T>(dcol.data(), kk, cols).noalias() =
        ConstMatrixMap<T>(weight.data(), ws.n, kk).transpose() * dym;
    *dx = Tensor<T>(xs);
    detail::col2im(dcol.data(), xs.n, xs.c, xs.h, xs.w, g, ho, wo, dx->data());
  }
}

/// Fractionally-strided convolution, the adjoint of conv2d with the same
/// geometry. Weight shape is (Cin, Cout, k, k).
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, ConvGeometry g) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != xs.c || ws.h != g.kernel || ws.w != g.kernel)
    throw ShapeMismatch("conv_transpose2d: weight " + ws.str() + " incompatible with input " + xs.str());
  const int ho = g.transpose_out(xs.h);
  const int wo = g.transpose_out(xs.w);
  if (ho < 1 || wo < 1 || g.conv_out(ho) != xs.h || g.conv_out(wo) != xs.w)
    throw ShapeMismatch("conv_transpose2d: geometry does not invert for input " + xs.str());

  const int cout = ws.c;
  const int kk = cout * g.kernel * g.kernel;
  const std::size_t p = xs.plane();
  const std::size_t cols = xs.n * p;

  std::vector<T> xcm(static_cast<std::size_t>(xs.c) * cols);
  detail::nchw_to_cm(x.data(), xs.n, xs.c, p, xcm.data());
  std::vector<T> col(kk * cols);
  MatrixMap<T>(col.data(), kk, cols).noalias() =
      ConstMatrixMap<T>(weight.data(), xs.c, kk).transpose() * ConstMatrixMap<T>(xcm.data(), xs.c, cols);

  Tensor<T> y(Shape{xs.n, cout, ho, wo});
  detail::col2im(col.data(), xs.n, cout, ho, wo, g, xs.h, xs.w, y.data());
  return y;
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& x, const Tensor<T>& weight, ConvGeometry g,
                               const Tensor<T>& dy, std::type_identity_t<Tensor<T>>* dx, std::type_identity_t<Tensor<T>>* dweight) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const Shape ys = dy.shape();
  const int kk = ws.c * g.kernel * g.kernel;
  const std::size_t p = xs.plane();
  const std::size_t cols = xs.n * p;

  std::vector<T> dcol(kk * cols);
  detail::im2col(dy.data(), ys.n, ys.c, ys.h, ys.w, g, xs.h, xs.w, dcol.data());
  ConstMatrixMap<T> dcolm(dcol.data(), kk, cols);

  if (dx) {
    std::vector<T> dxcm(static_cast<std::size_t>(xs.c) * cols);
    MatrixMap<T>(dxcm.data(), xs.c, cols).noalias() = ConstMatrixMap<T>(weight.data(), xs.c, kk) * dcolm;
    *dx = Tensor<T>(xs);
    detail::cm_to_nchw(dxcm.data(), xs.n, xs.c, p, dx->data());
  }
  if (dweight) {
    std::vector<T> xcm(static_cast<std::size_t>(xs.c) * cols);
    detail::nchw_to_cm(x.data(), xs.n, xs.c, p, xcm.data());
    *dweight = Tensor<T>(ws);
    MatrixMap<T>(dweight->data(), xs.c, kk).noalias() =
        ConstMatrixMap<T>(xcm.data(), xs.c, cols) * dcolm.transpose();
  }
}

/// y = x W^T over flattened samples. Weight shape is (out, in, 1, 1); output
/// shape is (N, out, 1, 1).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight) {
  const int in = static_cast<int>(x.shape().c * x.shape().plane());
  const Shape ws = weight.shape();
  if (ws.c != in || ws.plane() != 1)
    throw ShapeMismatch("linear: weight " + ws.str() + " incompatible with input " + x.shape().str());
  Tensor<T> y(Shape{x.shape().n, ws.n, 1, 1});
  MatrixMap<T>(y.data(), x.shape().n, ws.n).noalias() =
      ConstMatrixMap<T>(x.data(), x.shape().n, in) * ConstMatrixMap<T>(weight.data(), ws.n, in).transpose();
  return y;
}

template <typename T>
void linear_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy, std::type_identity_t<Tensor<T>>* dx,
                     std::type_identity_t<Tensor<T>>* dweight) {
  const int n = x.shape().n;
  const int in = static_cast<int>(x.shape().c * x.shape().plane());
  const int out = weight.shape().n;
  ConstMatrixMap<T> dym(dy.data(), n, out);
  if (dx) {
    *dx = Tensor<T>(x.shape());
    MatrixMap<T>(dx->data(), n, in).noalias() = dym * ConstMatrixMap<T>(weight.data(), out, in);
  }
  if (dweight) {
    *dweight = Tensor<T>(weight.shape());
    MatrixMap<T>(dweight->data(), out, in).noalias() = dym.transpose() * ConstMatrixMap<T>(x.data(), n, in);
  }
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
  return x;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, Tensor<T> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(x[i] > T(0))) dy[i] = T(0);
  return dy;
}

template <typename T>
Tensor<T> leaky_relu(Tensor<T> x, T slope) {
  for (auto& v : x.values()) v = v > T(0) ? v : slope * v;
  return x;
}

template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& x, Tensor<T> dy, T slope) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(x[i] > T(0))) dy[i] *= slope;
  return dy;
}

enum class Mode { Train, Eval };

/// Per-channel batch normalisation parameters and running statistics.
template <typename T>
struct BatchNormState {
  Param<T> gamma;
  Param<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T eps = T(1e-5);
  T momentum = T(0.1);

  explicit BatchNormState(int channels = 0)
      : gamma("gamma", Tensor<T>(Shape{1, channels}, T(1))), beta("beta", Tensor<T>(Shape{1, channels})),
        running_mean(Shape{1, channels}),
        running_var(Shape{1, channels}, T(1)) {}

  int channels() const { return gamma.value.shape().c; }
};

/// Values kept from a train-mode forward pass for the backward pass.
template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;
  std::vector<T> inv_std;
};

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, BatchNormState<T>& bn, Mode mode, BatchNormCache<T>* cache = nullptr) {
  const Shape s = x.shape();
  if (s.c != bn.channels())
    throw ShapeMismatch("batchnorm2d: " + std::to_string(bn.channels()) + " channels vs input " + s.str());
  if (mode == Mode::Train && s.n < 2) throw DegenerateBatch(s.n);

  const std::size_t p = s.plane();
  const double count = static_cast<double>(s.n) * p;
  Tensor<T> y(s);
  Tensor<T> xhat(s);
  std::vector<T> inv_std(s.c);

  for (int c = 0; c < s.c; ++c) {
    T mean, var;
    if (mode == Mode::Train) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < p; ++i) sum += x.data()[(static_cast<std::size_t>(n) * s.c + c) * p + i];
      const double m = sum / count;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n)
        for (std::size_t i = 0; i < p; ++i) {
          const double d = x.data()[(static_cast<std::size_t>(n) * s.c + c) * p + i] - m;
          sq += d * d;
        }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / count);
      bn.running_mean[c] = (T(1) - bn.momentum) * bn.running_mean[c] + bn.momentum * mean;
      bn.running_var[c] =
          (T(1) - bn.momentum) * bn.running_var[c] + bn.momentum * static_cast<T>(sq / (count - 1.0));
    } else {
      mean = bn.running_mean[c];
      var = bn.running_var[c];
    }
    const T istd = T(1) / std::sqrt(var + bn.eps);
    inv_std[c] = istd;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * p;
      for (std::size_t i = 0; i < p; ++i) {
        const T h = (x.data()[base + i] - mean) * istd;
        xhat.data()[base + i] = h;
        y.data()[base + i] = bn.gamma.value[c] * h + bn.beta.value[c];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

/// Eval-mode normalisation from running statistics; leaves `bn` untouched.
template <typename T>
Tensor<T> batchnorm2d_infer(const Tensor<T>& x, const BatchNormState<T>& bn) {
  const Shape s = x.shape();
  if (s.c != bn.channels())
    throw ShapeMismatch("batchnorm2d: " + std::to_string(bn.channels()) + " channels vs input " + s.str());
  const std::size_t p = s.plane();
  Tensor<T> y(s);
  for (int c = 0; c < s.c; ++c) {
    const T istd = T(1) / std::sqrt(bn.running_var[c] + bn.eps);
    const T mean = bn.running_mean[c];
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * p;
      for (std::size_t i = 0; i < p; ++i)
        y.data()[base + i] = bn.gamma.value[c] * ((x.data()[base + i] - mean) * istd) + bn.beta.value[c];
    }
  }
  return y;
}

/// Backward of a train-mode batchnorm2d.
template <typename T>
Tensor<T> batchnorm2d_backward(const BatchNormState<T>& bn, const BatchNormCache<T>& cache, const Tensor<T>& dy,
                               std::type_identity_t<Tensor<T>>* dgamma, std::type_identity_t<Tensor<T>>* dbeta) {
  const Shape s = dy.shape();
  const std::size_t p = s.plane();
  const T count = static_cast<T>(static_cast<double>(s.n) * p);
  Tensor<T> dx(s);
  if (dgamma) *dgamma = Tensor<T>(bn.gamma.value.shape());
  if (dbeta) *dbeta = Tensor<T>(bn.beta.value.shape());

  for (int c = 0; c < s.c; ++c) {
    T sum_dy = 0, sum_dy_xhat = 0;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * p;
      for (std::size_t i = 0; i < p; ++i) {
        sum_dy += dy.data()[base + i];
        sum_dy_xhat += dy.data()[base + i] * cache.normalized.data()[base + i];
      }
    }
    if (dgamma) (*dgamma)[c] = sum_dy_xhat;
    if (dbeta) (*dbeta)[c] = sum_dy;
    const T scale = bn.gamma.value[c] * cache.inv_std[c] / count;
    for (int n = 0; n < s.n; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * p;
      for (std::size_t i = 0; i < p; ++i)
        dx.data()[base + i] =
            scale * (count * dy.data()[base + i] - sum_dy - cache.normalized.data()[base + i] * sum_dy_xhat);
    }
  }
  return dx;
}

}  // namespace lve::nn

#endif  // LVE_NEURAL_LAYERS_HPP

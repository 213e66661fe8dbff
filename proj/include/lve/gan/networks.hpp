#ifndef LVE_GAN_NETWORKS_HPP
#define LVE_GAN_NETWORKS_HPP

// DCGAN generator and WGAN critic for 10x32x32 one-hot level windows.
//
// Generator: z(32) -> linear 256x4x4 -> BN -> ReLU
//                  -> convT 128x8x8  -> BN -> ReLU
//                  -> convT 64x16x16 -> BN -> ReLU
//                  -> convT 10x32x32 -> ReLU
// Critic:    10x32x32 -> conv 64x16x16 -> LReLU
//                     -> conv 128x8x8  -> BN -> LReLU
//                     -> conv 256x4x4  -> BN -> LReLU
//                     -> linear 1
// All convolutions use k4 s2 p1 and no bias.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lve/corpus.hpp"
#include "lve/neural/layers.hpp"
#include "lve/neural/param.hpp"

namespace lve::gan {

using nn::BatchNormCache;
using nn::BatchNormState;
using nn::Mode;
using nn::Param;
using nn::Shape;
using nn::Tensor;

inline constexpr int kLatentDim = 32;
inline constexpr char kGeneratorArchitecture[] =
    "dcgan32/z32-linear256x4x4-bn-relu/convT128-bn-relu/convT64-bn-relu/convT10-relu";
inline constexpr nn::ConvGeometry kUpDown{4, 2, 1};

template <typename T>
class Generator {
 public:
  struct Trace {
    Tensor<T> z;
    Tensor<T> pre0, pre1, pre2, pre3;  // layer outputs before BN (or before the final ReLU)
    Tensor<T> act0, act1, act2;        // post-activation inputs to the next layer
    Tensor<T> bn_out0, bn_out1, bn_out2;
    BatchNormCache<T> bn0, bn1, bn2;
  };

  explicit Generator(std::uint64_t seed = 0) : seed_(seed) {
    std::mt19937_64 rng(seed);
    project_ = Param<T>("project", Tensor<T>(Shape{256 * 4 * 4, kLatentDim, 1, 1}));
    up1_ = Param<T>("up1", Tensor<T>(Shape{256, 128, 4, 4}));
    up2_ = Param<T>("up2", Tensor<T>(Shape{128, 64, 4, 4}));
    up3_ = Param<T>("up3", Tensor<T>(Shape{64, kTileCount, 4, 4}));
    bn0_ = BatchNormState<T>(256);
    bn1_ = BatchNormState<T>(128);
    bn2_ = BatchNormState<T>(64);
    nn::fill_normal(project_.value, rng, 0.0, 0.02);
    nn::fill_normal(bn0_.gamma.value, rng, 1.0, 0.02);
    nn::fill_normal(up1_.value, rng, 0.0, 0.02);
    nn::fill_normal(bn1_.gamma.value, rng, 1.0, 0.02);
    nn::fill_normal(up2_.value, rng, 0.0, 0.02);
    nn::fill_normal(bn2_.gamma.value, rng, 1.0, 0.02);
    nn::fill_normal(up3_.value, rng, 0.0, 0.02);
    name_params();
  }

  std::uint64_t seed() const { return seed_; }
  long iterations() const { return iterations_; }
  void set_iterations(long it) { iterations_ = it; }

  /// Batched forward pass. Latents have shape (N, 32, 1, 1).
  Tensor<T> forward(const Tensor<T>& z, Mode mode, Trace* trace = nullptr) {
    check_latent(z);
    const int n = z.shape().n;
    Trace local;
    Trace& t = trace ? *trace : local;
    t.z = z;
    t.pre0 = nn::linear(z, project_.value).reshaped(Shape{n, 256, 4, 4});
    t.bn_out0 = nn::batchnorm2d(t.pre0, bn0_, mode, &t.bn0);
    t.act0 = nn::relu(t.bn_out0);
    t.pre1 = nn::conv_transpose2d(t.act0, up1_.value, kUpDown);
    t.bn_out1 = nn::batchnorm2d(t.pre1, bn1_, mode, &t.bn1);
    t.act1 = nn::relu(t.bn_out1);
    t.pre2 = nn::conv_transpose2d(t.act1, up2_.value, kUpDown);
    t.bn_out2 = nn::batchnorm2d(t.pre2, bn2_, mode, &t.bn2);
    t.act2 = nn::relu(t.bn_out2);
    t.pre3 = nn::conv_transpose2d(t.act2, up3_.value, kUpDown);
    return nn::relu(t.pre3);
  }

  /// Eval-mode forward pass that touches no mutable state; safe to call
  /// concurrently on a shared model.
  Tensor<T> infer(const Tensor<T>& z) const {
    check_latent(z);
    const int n = z.shape().n;
    Tensor<T> h = nn::linear(z, project_.value).reshaped(Shape{n, 256, 4, 4});
    h = nn::relu(nn::batchnorm2d_infer(h, bn0_));
    h = nn::relu(nn::batchnorm2d_infer(nn::conv_transpose2d(h, up1_.value, kUpDown), bn1_));
    h = nn::relu(nn::batchnorm2d_infer(nn::conv_transpose2d(h, up2_.value, kUpDown), bn2_));
    return nn::relu(nn::conv_transpose2d(h, up3_.value, kUpDown));
  }

  /// Single latent to decoded 28x14 level.
  TileGrid generate(std::span<const T> latent) const {
    if (latent.size() != static_cast<std::size_t>(kLatentDim))
      throw ShapeMismatch("latent vector must have " + std::to_string(kLatentDim) + " values, got " +
                          std::to_string(latent.size()));
    Tensor<T> z(Shape{1, kLatentDim, 1, 1}, std::vector<T>(latent.begin(), latent.end()));
    const Tensor<T> out = infer(z);
    return decode_window(out.values());
  }

  /// Backpropagates `dout` (gradient w.r.t. the output) through a train-mode
  /// trace, adding into parameter gradients. Optionally returns dL/dz.
  void backward(const Trace& t, const Tensor<T>& dout, Tensor<T>* dz = nullptr) {
    Tensor<T> d = nn::relu_backward(t.pre3, dout);
    Tensor<T> dx, dw;
    nn::conv_transpose2d_backward(t.act2, up3_.value, kUpDown, d, &dx, &dw);
    add_grad(up3_, dw);

    d = backward_bn_relu(bn2_, t.bn2, t.bn_out2, std::move(dx));
    nn::conv_transpose2d_backward(t.act1, up2_.value, kUpDown, d, &dx, &dw);
    add_grad(up2_, dw);

    d = backward_bn_relu(bn1_, t.bn1, t.bn_out1, std::move(dx));
    nn::conv_transpose2d_backward(t.act0, up1_.value, kUpDown, d, &dx, &dw);
    add_grad(up1_, dw);

    d = backward_bn_relu(bn0_, t.bn0, t.bn_out0, std::move(dx));
    d = std::move(d).reshaped(Shape{t.z.shape().n, 256 * 4 * 4, 1, 1});
    nn::linear_backward(t.z, project_.value, d, dz, &dw);
    add_grad(project_, dw);
  }

  std::vector<Param<T>*> params() {
    return {&project_, &bn0_.gamma, &bn0_.beta, &up1_, &bn1_.gamma, &bn1_.beta,
            &up2_,     &bn2_.gamma, &bn2_.beta, &up3_};
  }
  std::vector<const Param<T>*> params() const {
    return {&project_, &bn0_.gamma, &bn0_.beta, &up1_, &bn1_.gamma, &bn1_.beta,
            &up2_,     &bn2_.gamma, &bn2_.beta, &up3_};
  }

  /// Every tensor that defines inference output, in serialization order.
  std::vector<Tensor<T>*> state_tensors() {
    std::vector<Tensor<T>*> out;
    for (auto* p : params()) out.push_back(&p->value);
    for (auto* bn : {&bn0_, &bn1_, &bn2_}) {
      out.push_back(&bn->running_mean);
      out.push_back(&bn->running_var);
    }
    return out;
  }
  std::vector<std::string> state_names() const {
    std::vector<std::string> out;
    for (auto* p : params()) out.push_back(p->name);
    for (const char* bn : {"bn0", "bn1", "bn2"}) {
      out.push_back(std::string(bn) + ".running_mean");
      out.push_back(std::string(bn) + ".running_var");
    }
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

 private:
  static void check_latent(const Tensor<T>& z) {
    if (z.shape().c * z.shape().plane() != static_cast<std::size_t>(kLatentDim))
      throw ShapeMismatch("generator expects latents of dimension 32, got shape " + z.shape().str());
  }

  static void add_grad(Param<T>& p, const Tensor<T>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
  }

  static Tensor<T> backward_bn_relu(BatchNormState<T>& bn, const BatchNormCache<T>& cache,
                                    const Tensor<T>& bn_out, Tensor<T> d) {
    d = nn::relu_backward(bn_out, std::move(d));
    Tensor<T> dg, db;
    Tensor<T> dx = nn::batchnorm2d_backward(bn, cache, d, &dg, &db);
    add_grad(bn.gamma, dg);
    add_grad(bn.beta, db);
    return dx;
  }

  void name_params() {
    bn0_.gamma.name = "bn0.gamma";
    bn0_.beta.name = "bn0.beta";
    bn1_.gamma.name = "bn1.gamma";
    bn1_.beta.name = "bn1.beta";
    bn2_.gamma.name = "bn2.gamma";
    bn2_.beta.name = "bn2.beta";
  }

  Param<T> project_, up1_, up2_, up3_;
  BatchNormState<T> bn0_, bn1_, bn2_;
  std::uint64_t seed_ = 0;
  long iterations_ = 0;
};

/// WGAN critic: unbounded scalar score per input window.
template <typename T>
class Critic {
 public:
  static constexpr double kSlope = 0.2;

  struct Trace {
    Tensor<T> x;
    Tensor<T> pre0, act0;
    Tensor<T> pre1, bn_out1, act1;
    Tensor<T> pre2, bn_out2, act2;
    BatchNormCache<T> bn1, bn2;
  };

  explicit Critic(std::uint64_t seed = 0) {
    std::mt19937_64 rng(seed);
    down1_ = Param<T>("down1", Tensor<T>(Shape{64, kTileCount, 4, 4}));
    down2_ = Param<T>("down2", Tensor<T>(Shape{128, 64, 4, 4}));
    down3_ = Param<T>("down3", Tensor<T>(Shape{256, 128, 4, 4}));
    head_ = Param<T>("head", Tensor<T>(Shape{1, 256 * 4 * 4, 1, 1}));
    bn1_ = BatchNormState<T>(128);
    bn2_ = BatchNormState<T>(256);
    nn::fill_normal(down1_.value, rng, 0.0, 0.02);
    nn::fill_normal(down2_.value, rng, 0.0, 0.02);
    nn::fill_normal(bn1_.gamma.value, rng, 1.0, 0.02);
    nn::fill_normal(down3_.value, rng, 0.0, 0.02);
    nn::fill_normal(bn2_.gamma.value, rng, 1.0, 0.02);
    nn::fill_normal(head_.value, rng, 0.0, 0.02);
    bn1_.gamma.name = "bn1.gamma";
    bn1_.beta.name = "bn1.beta";
    bn2_.gamma.name = "bn2.gamma";
    bn2_.beta.name = "bn2.beta";
  }

  /// Scores a batch (N, 10, 32, 32) -> (N, 1, 1, 1). Batchnorm always uses
  /// batch statistics here, so N >= 2.
  Tensor<T> forward(const Tensor<T>& x, Trace* trace = nullptr) {
    const Shape s = x.shape();
    if (s.c != kTileCount || s.h != kPaddedSize || s.w != kPaddedSize)
      throw ShapeMismatch("critic expects (N,10,32,32), got " + s.str());
    Trace local;
    Trace& t = trace ? *trace : local;
    const T slope = static_cast<T>(kSlope);
    t.x = x;
    t.pre0 = nn::conv2d(x, down1_.value, kUpDown);
    t.act0 = nn::leaky_relu(t.pre0, slope);
    t.pre1 = nn::conv2d(t.act0, down2_.value, kUpDown);
    t.bn_out1 = nn::batchnorm2d(t.pre1, bn1_, Mode::Train, &t.bn1);
    t.act1 = nn::leaky_relu(t.bn_out1, slope);
    t.pre2 = nn::conv2d(t.act1, down3_.value, kUpDown);
    t.bn_out2 = nn::batchnorm2d(t.pre2, bn2_, Mode::Train, &t.bn2);
    t.act2 = nn::leaky_relu(t.bn_out2, slope);
    return nn::linear(t.act2, head_.value);
  }

  /// Backpropagates `dout` of shape (N,1,1,1). Parameter gradients are added
  /// only when `param_grads` is set; `dx` receives the input gradient.
  void backward(const Trace& t, const Tensor<T>& dout, Tensor<T>* dx, bool param_grads = true) {
    const T slope = static_cast<T>(kSlope);
    Tensor<T> d, dw;
    Tensor<T>* dwp = param_grads ? &dw : nullptr;

    nn::linear_backward(t.act2, head_.value, dout, &d, dwp);
    if (param_grads) add_grad(head_, dw);

    d = nn::leaky_relu_backward(t.bn_out2, std::move(d).reshaped(t.act2.shape()), slope);
    d = backward_bn(bn2_, t.bn2, d, param_grads);
    Tensor<T> dprev;
    nn::conv2d_backward(t.act1, down3_.value, kUpDown, d, &dprev, dwp);
    if (param_grads) add_grad(down3_, dw);

    d = nn::leaky_relu_backward(t.bn_out1, std::move(dprev), slope);
    d = backward_bn(bn1_, t.bn1, d, param_grads);
    nn::conv2d_backward(t.act0, down2_.value, kUpDown, d, &dprev, dwp);
    if (param_grads) add_grad(down2_, dw);

    d = nn::leaky_relu_backward(t.pre0, std::move(dprev), slope);
    nn::conv2d_backward(t.x, down1_.value, kUpDown, d, dx, dwp);
    if (param_grads) add_grad(down1_, dw);
  }

  std::vector<Param<T>*> params() {
    return {&down1_, &down2_, &bn1_.gamma, &bn1_.beta, &down3_, &bn2_.gamma, &bn2_.beta, &head_};
  }
  std::vector<const Param<T>*> params() const {
    return {&down1_, &down2_, &bn1_.gamma, &bn1_.beta, &down3_, &bn2_.gamma, &bn2_.beta, &head_};
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }

  void clip(T bound) {
    for (auto* p : params()) p->clip(bound);
  }

  T max_abs_weight() const {
    T m = 0;
    for (const auto* p : params())
      for (T v : p->value.values()) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  static void add_grad(Param<T>& p, const Tensor<T>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
  }

  static Tensor<T> backward_bn(BatchNormState<T>& bn, const BatchNormCache<T>& cache, const Tensor<T>& d,
                               bool param_grads) {
    Tensor<T> dg, db;
    Tensor<T> dx = nn::batchnorm2d_backward(bn, cache, d, param_grads ? &dg : nullptr, param_grads ? &db : nullptr);
    if (param_grads) {
      add_grad(bn.gamma, dg);
      add_grad(bn.beta, db);
    }
    return dx;
  }

  Param<T> down1_, down2_, down3_, head_;
  BatchNormState<T> bn1_, bn2_;
};

}  // namespace lve::gan

#endif  // LVE_GAN_NETWORKS_HPP

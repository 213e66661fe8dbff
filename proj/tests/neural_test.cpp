#include "lve/neural/layers.hpp"
#include "lve/neural/rmsprop.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"

namespace lve::nn {
namespace {

using test::max_fd_error;
using test::random_tensor;

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor<double> x = random_tensor(Shape{1, 1, 3, 3}, rng);
  const Tensor<double> w(Shape{1, 1, 1, 1}, 1.0);
  const Tensor<double> y = conv2d(x, w, ConvGeometry{1, 1, 0});
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_EQ(y, x);
}

TEST(Conv2d, StridedOnesKernel) {
  const Tensor<double> x(Shape{1, 1, 4, 4}, 1.0);
  const Tensor<double> w(Shape{1, 1, 2, 2}, 1.0);
  const Tensor<double> y = conv2d(x, w, ConvGeometry{2, 2, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 4.0);
}

TEST(Conv2d, OutputSizeFormulaAndShapeErrors) {
  const Tensor<float> x(Shape{2, 3, 9, 7});
  const Tensor<float> w(Shape{5, 3, 3, 3});
  const ConvGeometry g{3, 2, 1};
  const Tensor<float> y = conv2d(x, w, g);
  EXPECT_EQ(y.shape(), (Shape{2, 5, (9 + 2 - 3) / 2 + 1, (7 + 2 - 3) / 2 + 1}));
  EXPECT_THROW(conv2d(x, Tensor<float>(Shape{5, 4, 3, 3}), g), ShapeMismatch);
  EXPECT_THROW(conv2d(Tensor<float>(Shape{1, 3, 1, 1}), w, ConvGeometry{3, 1, 0}), ShapeMismatch);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  Tensor<double> x = random_tensor(Shape{2, 3, 8, 8}, rng);
  Tensor<double> w = random_tensor(Shape{4, 3, 4, 4}, rng);
  const ConvGeometry g{4, 2, 1};
  const Tensor<double> proj = random_tensor(conv2d(x, w, g).shape(), rng);
  Tensor<double> dx, dw;
  conv2d_backward(x, w, g, proj, &dx, &dw);
  auto fwd = [&] { return conv2d(x, w, g); };
  EXPECT_LT(max_fd_error(x, dx, fwd, proj), 1e-3);
  EXPECT_LT(max_fd_error(w, dw, fwd, proj), 1e-3);
}

TEST(ConvTranspose2d, TilesInputWithOnesKernel) {
  const Tensor<double> x(Shape{1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const Tensor<double> w(Shape{1, 1, 2, 2}, 1.0);
  const Tensor<double> y = conv_transpose2d(x, w, ConvGeometry{2, 2, 0});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) EXPECT_EQ(y(0, 0, r, c), x(0, 0, r / 2, c / 2));
}

TEST(ConvTranspose2d, EqualsConvBackwardData) {
  std::mt19937_64 rng(3);
  const ConvGeometry g{4, 2, 1};
  const Tensor<double> w = random_tensor(Shape{6, 5, 4, 4}, rng);  // conv: 5 -> 6 channels
  const Tensor<double> x(Shape{2, 5, 8, 8});
  const Tensor<double> dy = random_tensor(Shape{2, 6, 4, 4}, rng);
  Tensor<double> dx;
  conv2d_backward(x, w, g, dy, &dx, nullptr);
  const Tensor<double> y = conv_transpose2d(dy, w, g);
  ASSERT_EQ(y.shape(), dx.shape());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], dx[i]);
}

TEST(ConvTranspose2d, AdjointIdentity) {
  std::mt19937_64 rng(4);
  const ConvGeometry g{4, 2, 1};
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor<double> w = random_tensor(Shape{3, 2, 4, 4}, rng);
    const Tensor<double> x = random_tensor(Shape{2, 2, 8, 8}, rng);
    const Tensor<double> y = random_tensor(Shape{2, 3, 4, 4}, rng);
    const double lhs = dot(conv2d(x, w, g), y);
    const double rhs = dot(x, conv_transpose2d(y, w, g));
    EXPECT_NEAR(lhs, rhs, 1e-6);
  }
}

TEST(ConvTranspose2d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const ConvGeometry g{4, 2, 1};
  Tensor<double> x = random_tensor(Shape{2, 3, 4, 4}, rng);
  Tensor<double> w = random_tensor(Shape{3, 2, 4, 4}, rng);
  const Tensor<double> proj = random_tensor(conv_transpose2d(x, w, g).shape(), rng);
  Tensor<double> dx, dw;
  conv_transpose2d_backward(x, w, g, proj, &dx, &dw);
  auto fwd = [&] { return conv_transpose2d(x, w, g); };
  EXPECT_LT(max_fd_error(x, dx, fwd, proj), 1e-3);
  EXPECT_LT(max_fd_error(w, dw, fwd, proj), 1e-3);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  Tensor<double> x = random_tensor(Shape{3, 4, 2, 2}, rng);
  Tensor<double> w = random_tensor(Shape{5, 16, 1, 1}, rng);
  const Tensor<double> proj = random_tensor(Shape{3, 5, 1, 1}, rng);
  Tensor<double> dx, dw;
  linear_backward(x, w, proj, &dx, &dw);
  auto fwd = [&] { return linear(x, w); };
  EXPECT_LT(max_fd_error(x, dx, fwd, proj), 1e-3);
  EXPECT_LT(max_fd_error(w, dw, fwd, proj), 1e-3);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  std::mt19937_64 rng(7);
  const Tensor<double> x = random_tensor(Shape{4, 3, 5, 5}, rng, -3.0, 7.0);
  BatchNormState<double> bn(3);
  const Tensor<double> y = batchnorm2d(x, bn, Mode::Train);
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i) sum += y(n, c, i / 5, i % 5);
    const double mean = sum / 100;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i) sq += std::pow(y(n, c, i / 5, i % 5) - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(sq / 100, 1.0, 1e-4);
  }
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  const Tensor<float> x(Shape{3, 2, 4, 4}, 2.5f);
  BatchNormState<float> bn(2);
  const Tensor<float> y = batchnorm2d(x, bn, Mode::Train);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_TRUE(y.all_finite());
}

TEST(BatchNorm, RunningStatisticsAndEvalMode) {
  std::mt19937_64 rng(8);
  const Tensor<double> x = random_tensor(Shape{4, 2, 3, 3}, rng);
  BatchNormState<double> bn(2);
  batchnorm2d(x, bn, Mode::Train);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NE(bn.running_mean[c], 0.0);
    EXPECT_GE(bn.running_var[c], 0.0);
  }
  const BatchNormState<double> frozen = bn;
  const Tensor<double> a = batchnorm2d(x, bn, Mode::Eval);
  const Tensor<double> b = batchnorm2d_infer(x, frozen);
  EXPECT_EQ(a, b);
  EXPECT_EQ(bn.running_mean, frozen.running_mean);
  // Eval mode accepts a single sample.
  EXPECT_NO_THROW(batchnorm2d_infer(Tensor<double>(Shape{1, 2, 3, 3}), bn));
}

TEST(BatchNorm, DegenerateBatchInTrainMode) {
  BatchNormState<float> bn(2);
  EXPECT_THROW(batchnorm2d(Tensor<float>(Shape{1, 2, 3, 3}), bn, Mode::Train), DegenerateBatch);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  Tensor<double> x = random_tensor(Shape{3, 2, 3, 3}, rng);
  BatchNormState<double> bn(2);
  bn.gamma.value = random_tensor(Shape{1, 2}, rng, 0.5, 1.5);
  bn.beta.value = random_tensor(Shape{1, 2}, rng);
  BatchNormCache<double> cache;
  const Tensor<double> proj = random_tensor(x.shape(), rng);
  batchnorm2d(x, bn, Mode::Train, &cache);
  Tensor<double> dg, db;
  const Tensor<double> dx = batchnorm2d_backward(bn, cache, proj, &dg, &db);
  auto fwd = [&] {
    BatchNormState<double> scratch = bn;
    return batchnorm2d(x, scratch, Mode::Train);
  };
  EXPECT_LT(max_fd_error(x, dx, fwd, proj), 1e-3);
  EXPECT_LT(max_fd_error(bn.gamma.value, dg, fwd, proj), 1e-3);
  EXPECT_LT(max_fd_error(bn.beta.value, db, fwd, proj), 1e-3);
}

TEST(Activations, Values) {
  const Tensor<double> x(Shape{1, 3}, std::vector<double>{-1, 0, 2});
  EXPECT_EQ(relu(x), Tensor<double>(Shape{1, 3}, std::vector<double>{0, 0, 2}));
  const Tensor<double> l = leaky_relu(x, 0.2);
  EXPECT_DOUBLE_EQ(l[0], -0.2);
  EXPECT_DOUBLE_EQ(l[1], 0.0);
  EXPECT_DOUBLE_EQ(l[2], 2.0);
}

TEST(Activations, GradientsAwayFromKink) {
  std::mt19937_64 rng(10);
  Tensor<double> x = random_tensor(Shape{2, 3, 4, 4}, rng);
  for (auto& v : x.values())
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
  const Tensor<double> proj = random_tensor(x.shape(), rng);
  EXPECT_LT(max_fd_error(x, relu_backward(x, proj), [&] { return relu(x); }, proj), 1e-4);
  EXPECT_LT(max_fd_error(x, leaky_relu_backward(x, proj, 0.2), [&] { return leaky_relu(x, 0.2); }, proj), 1e-4);
}

TEST(RmsProp, ZeroGradientLeavesWeights) {
  Param<double> p("w", Tensor<double>(Shape{1, 3}, std::vector<double>{1, -2, 3}));
  const Tensor<double> before = p.value;
  rmsprop_step(p, RmsPropConfig{});
  EXPECT_EQ(p.value, before);
}

TEST(RmsProp, SingleStepHandArithmetic) {
  Param<double> p("w", Tensor<double>(Shape{1, 1}, 1.0));
  p.grad[0] = 1.0;
  rmsprop_step(p, RmsPropConfig{0.00005, 0.99, 1e-8});
  EXPECT_NEAR(p.accum[0], 0.01, 1e-15);
  EXPECT_NEAR(p.value[0], 1.0 - 0.00005 / std::sqrt(0.01 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[0], 0.9995, 1e-9);
}

TEST(RmsProp, AccumulatorApproachesSquaredGradient) {
  Param<double> p("w", Tensor<double>(Shape{1, 1}, 0.0));
  p.grad[0] = 3.0;
  for (int i = 0; i < 3000; ++i) rmsprop_step(p, RmsPropConfig{});
  EXPECT_NEAR(p.accum[0], 9.0, 1e-9);
  EXPECT_GE(p.accum[0], 0.0);
}

TEST(Param, ClipBoundsEveryValue) {
  Param<float> p("w", Tensor<float>(Shape{1, 4}, std::vector<float>{-1.f, 0.005f, 0.5f, -0.001f}));
  p.clip(0.01f);
  EXPECT_EQ(p.value, Tensor<float>(Shape{1, 4}, std::vector<float>{-0.01f, 0.005f, 0.01f, -0.001f}));
}

}  // namespace
}  // namespace lve::nn

#include "lve/gan/model_io.hpp"
#include "lve/gan/networks.hpp"
#include "lve/gan/train.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "test_util.hpp"

namespace lve::gan {
namespace {

using test::max_fd_error;
using test::random_tensor;

std::vector<TrainingWindow> corpus_windows() {
  std::vector<TrainingWindow> out;
  for (const auto& w : slide_windows(load_vglc(test::training_level_path()))) out.push_back(encode_window(w));
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("lve_gan_test_" + name)).string();
}

TEST(Generator, OutputShapeAndRange) {
  const Generator<float> g(1);
  const Tensor<float> out = g.infer(Tensor<float>(Shape{1, kLatentDim, 1, 1}));
  EXPECT_EQ(out.shape(), (Shape{1, 10, 32, 32}));
  std::mt19937_64 rng(2);
  Tensor<float> z(Shape{4, kLatentDim, 1, 1});
  nn::fill_normal(z, rng, 0.0, 3.0);
  const Tensor<float> batch = g.infer(z);
  EXPECT_EQ(batch.shape(), (Shape{4, 10, 32, 32}));
  for (float v : batch.values()) ASSERT_GE(v, 0.0f);
}

TEST(Generator, SameSeedSameWeights) {
  Generator<float> a(42), b(42), c(43);
  const auto pa = a.state_tensors(), pb = b.state_tensors(), pc = c.state_tensors();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(*pa[i], *pb[i]);
    any_diff |= !(*pa[i] == *pc[i]);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Generator, GenerateDecodesValidLevel) {
  const Generator<float> g(3);
  std::vector<float> z(kLatentDim, 0.5f);
  const TileGrid level = g.generate(z);
  EXPECT_EQ(level.width(), 28);
  EXPECT_EQ(level.height(), 14);
  for (auto v : level.cells()) EXPECT_LT(v, kTileCount);
  std::vector<float> bad(33, 0.0f);
  EXPECT_THROW(g.generate(bad), ShapeMismatch);
}

TEST(Generator, TrainAndEvalForwardAgreeOnShapes) {
  Generator<float> g(4);
  std::mt19937_64 rng(5);
  Tensor<float> z(Shape{3, kLatentDim, 1, 1});
  nn::fill_normal(z, rng, 0.0, 1.0);
  const Tensor<float> train = g.forward(z, Mode::Train);
  EXPECT_EQ(train.shape(), (Shape{3, 10, 32, 32}));
  EXPECT_THROW(g.forward(Tensor<float>(Shape{1, kLatentDim, 1, 1}), Mode::Train), DegenerateBatch);
}

TEST(Generator, GradientMatchesFiniteDifferences) {
  Generator<double> g(6);
  std::mt19937_64 rng(7);
  Tensor<double> z = random_tensor(Shape{2, kLatentDim, 1, 1}, rng);
  const Tensor<double> proj = random_tensor(Shape{2, 10, 32, 32}, rng);
  typename Generator<double>::Trace trace;
  g.zero_grad();
  g.forward(z, Mode::Train, &trace);
  Tensor<double> dz;
  g.backward(trace, proj, &dz);
  // 20k ReLU outputs: a small step keeps the difference from crossing kinks.
  auto fwd = [&] {
    Generator<double> scratch = g;
    return scratch.forward(z, Mode::Train);
  };
  EXPECT_LT(max_fd_error(z, dz, fwd, proj, test::sample_indices(z.size(), 12, rng), 1e-7), 1e-2);
  for (auto* p : g.params()) {
    const Tensor<double> grad = p->grad;
    EXPECT_LT(max_fd_error(p->value, grad, fwd, proj, test::sample_indices(p->value.size(), 4, rng), 1e-7), 1e-2)
        << p->name;
  }
}

TEST(Critic, ScalarPerSample) {
  Critic<float> d(8);
  std::mt19937_64 rng(9);
  const auto windows = corpus_windows();
  Tensor<float> x(Shape{5, 10, 32, 32});
  for (int i = 0; i < 5; ++i)
    std::copy(windows[i * 30].data.begin(), windows[i * 30].data.end(), x.sample(i).begin());
  const Tensor<float> s = d.forward(x);
  EXPECT_EQ(s.shape(), (Shape{5, 1, 1, 1}));
  EXPECT_TRUE(s.all_finite());
}

TEST(Critic, GradientMatchesFiniteDifferences) {
  Critic<double> d(10);
  std::mt19937_64 rng(11);
  Tensor<double> x = random_tensor(Shape{2, 10, 32, 32}, rng, 0.0, 1.0);
  const Tensor<double> proj = random_tensor(Shape{2, 1, 1, 1}, rng);
  typename Critic<double>::Trace trace;
  d.zero_grad();
  d.forward(x, &trace);
  Tensor<double> dx;
  d.backward(trace, proj, &dx);
  auto fwd = [&] {
    Critic<double> scratch = d;
    return scratch.forward(x);
  };
  EXPECT_LT(max_fd_error(x, dx, fwd, proj, test::sample_indices(x.size(), 20, rng)), 1e-2);
  for (auto* p : d.params()) {
    const Tensor<double> grad = p->grad;
    EXPECT_LT(max_fd_error(p->value, grad, fwd, proj, test::sample_indices(p->value.size(), 4, rng)), 1e-2)
        << p->name;
  }
}

TEST(WganTrain, ZeroIterationsReturnsFreshGenerator) {
  const auto windows = corpus_windows();
  TrainConfig cfg;
  cfg.iterations = 0;
  cfg.seed = 12;
  Generator<float> trained = wgan_train<float>(windows, cfg);
  Generator<float> fresh(12);
  const auto a = trained.state_tensors(), b = fresh.state_tensors();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
  EXPECT_EQ(trained.iterations(), 0);
}

TEST(WganTrain, EmptyDatasetAndBadConfig) {
  TrainConfig cfg;
  EXPECT_THROW(wgan_train<float>({}, cfg), EmptyDataset);
  cfg.clip = 0.0;
  const auto windows = corpus_windows();
  EXPECT_THROW(wgan_train<float>(windows, cfg), InputError);
}

TEST(WganTrain, ClipsCriticAndIsBitReproducible) {
  const auto windows = corpus_windows();
  TrainConfig cfg;
  cfg.iterations = 2;
  cfg.batch_size = 8;
  cfg.seed = 13;
  int critic_updates = 0;
  std::vector<TrainLogRow> log;
  TrainObserver<float> obs;
  obs.after_critic_update = [&](const Critic<float>& c) {
    ++critic_updates;
    EXPECT_LE(c.max_abs_weight(), static_cast<float>(cfg.clip));
  };
  obs.on_iteration = [&](const TrainLogRow& r) { log.push_back(r); };
  const Generator<float> a = wgan_train<float>(windows, cfg, obs);
  EXPECT_EQ(critic_updates, 2 * cfg.critic_steps);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[1].iteration, 2);
  EXPECT_DOUBLE_EQ(log[1].critic_loss, -log[1].wasserstein_estimate);
  EXPECT_EQ(a.iterations(), 2);

  Generator<float> b = wgan_train<float>(windows, cfg);
  Generator<float> a_copy = a;
  const auto sa = a_copy.state_tensors(), sb = b.state_tensors();
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(*sa[i], *sb[i]);

  // Training moved the generator away from its initialisation.
  Generator<float> fresh(13);
  EXPECT_FALSE(*fresh.state_tensors()[0] == *sa[0]);
}

TEST(WganTrain, ReplicatesSmallDatasets) {
  const auto windows = corpus_windows();
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.batch_size = 4;
  cfg.critic_steps = 1;
  const std::vector<TrainingWindow> tiny(windows.begin(), windows.begin() + 2);
  EXPECT_NO_THROW(wgan_train<float>(tiny, cfg));
}

TEST(ModelIo, RoundTripIsBitIdentical) {
  const auto windows = corpus_windows();
  TrainConfig cfg;
  cfg.iterations = 1;
  cfg.batch_size = 4;
  cfg.critic_steps = 1;
  cfg.seed = 14;
  const Generator<float> g = wgan_train<float>(windows, cfg);
  const std::string path = temp_path("roundtrip.lvem");
  save_model(g, path);
  const Generator<float> back = load_model(path);
  EXPECT_EQ(back.seed(), 14u);
  EXPECT_EQ(back.iterations(), 1);
  std::mt19937_64 rng(15);
  for (int i = 0; i < 10; ++i) {
    Tensor<float> z(Shape{1, kLatentDim, 1, 1});
    nn::fill_normal(z, rng, 0.0, 1.0);
    EXPECT_EQ(g.infer(z), back.infer(z));
  }
  const auto manifest = read_model_manifest(path);
  EXPECT_EQ(manifest.at("latent_dim").get<int>(), 32);
  EXPECT_EQ(manifest.at("architecture").get<std::string>(), kGeneratorArchitecture);

  // Saving the same model twice gives identical bytes.
  const std::string again = temp_path("roundtrip2.lvem");
  save_model(back, again);
  EXPECT_EQ(test::read_file(path), test::read_file(again));
  std::remove(path.c_str());
  std::remove(again.c_str());
}

TEST(ModelIo, CorruptFilesFailCleanly) {
  const std::string path = temp_path("corrupt.lvem");
  save_model(Generator<float>(16), path);
  const std::string bytes = test::read_file(path);
  auto write = [&](const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  };

  write(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_model(path), ChecksumMismatch);

  write(bytes.substr(0, 40));
  EXPECT_THROW(load_model(path), FormatVersionMismatch);

  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x55;
  write(flipped);
  EXPECT_THROW(load_model(path), ChecksumMismatch);

  std::string wrong_version = bytes;
  wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":9");
  write(wrong_version);
  EXPECT_THROW(load_model(path), FormatVersionMismatch);

  write("");
  EXPECT_THROW(load_model(path), FormatVersionMismatch);
  std::remove(path.c_str());
  EXPECT_THROW(load_model(temp_path("does_not_exist.lvem")), IoError);
}

}  // namespace
}  // namespace lve::gan

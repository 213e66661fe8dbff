#ifndef LVE_GAN_TRAIN_HPP
#define LVE_GAN_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "lve/corpus.hpp"
#include "lve/gan/networks.hpp"
#include "lve/neural/rmsprop.hpp"

namespace lve::gan {

struct TrainConfig {
  int iterations = 5000;  // generator updates
  int batch_size = 32;
  double lr = 0.00005;
  int critic_steps = 5;
  double clip = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    if (iterations < 0 || batch_size < 2 || lr <= 0.0 || critic_steps < 1 || clip <= 0.0)
      throw InputError("invalid training configuration");
  }
};

struct TrainLogRow {
  int iteration = 0;
  double wasserstein_estimate = 0.0;  // mean D(real) - mean D(fake), last critic step
  double critic_loss = 0.0;
  double generator_loss = 0.0;
};

inline void write_train_log_header(std::ostream& out) {
  out << "iteration,wasserstein_estimate,critic_loss,generator_loss\n";
}

inline void write_train_log_row(std::ostream& out, const TrainLogRow& r) {
  out << r.iteration << ',' << r.wasserstein_estimate << ',' << r.critic_loss << ',' << r.generator_loss << '\n';
}

/// Optional hooks into the training loop.
template <typename T>
struct TrainObserver {
  std::function<void(const TrainLogRow&)> on_iteration;
  std::function<void(const Critic<T>&)> after_critic_update;
};

namespace detail {

// Draws real batches: shuffled passes when the dataset covers a batch,
// sampling with replacement otherwise.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, int batch, std::uint64_t seed)
      : size_(dataset_size), batch_(batch), rng_(seed), order_(dataset_size) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = size_;
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> idx(batch_);
    if (size_ < static_cast<std::size_t>(batch_)) {
      std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
      for (auto& i : idx) i = pick(rng_);
      return idx;
    }
    for (auto& i : idx) {
      if (cursor_ == size_) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
      }
      i = order_[cursor_++];
    }
    return idx;
  }

 private:
  std::size_t size_;
  int batch_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_;
};

template <typename T>
Tensor<T> gather(std::span<const TrainingWindow> windows, const std::vector<std::size_t>& idx) {
  Tensor<T> batch(Shape{static_cast<int>(idx.size()), kTileCount, kPaddedSize, kPaddedSize});
  for (std::size_t b = 0; b < idx.size(); ++b)
    std::copy(windows[idx[b]].data.begin(), windows[idx[b]].data.end(), batch.sample(static_cast<int>(b)).begin());
  return batch;
}

template <typename T, typename Rng>
Tensor<T> sample_latents(int n, Rng& rng) {
  Tensor<T> z(Shape{n, kLatentDim, 1, 1});
  nn::fill_normal(z, rng, 0.0, 1.0);
  return z;
}

template <typename T>
double mean_of(const Tensor<T>& t) {
  double s = 0.0;
  for (T v : t.values()) s += v;
  return s / static_cast<double>(t.size());
}

}  // namespace detail

/// WGAN training: `critic_steps` clipped critic updates per generator update.
/// The critic maximises mean D(real) - mean D(fake); the generator maximises
/// mean D(G(z)). Returns the generator after `cfg.iterations` updates.
template <typename T = float>
Generator<T> wgan_train(std::span<const TrainingWindow> windows, const TrainConfig& cfg,
                        const TrainObserver<T>& observer = {}) {
  cfg.validate();
  if (windows.empty()) throw EmptyDataset();

  std::seed_seq seq{cfg.seed};
  std::uint64_t seeds[4];
  {
    std::vector<std::uint32_t> raw(8);
    seq.generate(raw.begin(), raw.end());
    for (int i = 0; i < 4; ++i) seeds[i] = (std::uint64_t(raw[2 * i]) << 32) | raw[2 * i + 1];
  }
  Generator<T> gen(cfg.seed);
  Critic<T> critic(seeds[0]);
  detail::BatchSampler sampler(windows.size(), cfg.batch_size, seeds[1]);
  std::mt19937_64 noise(seeds[2]);

  const nn::RmsPropConfig opt{cfg.lr, 0.99, 1e-8};
  const int n = cfg.batch_size;
  const T inv_n = T(1) / static_cast<T>(n);
  auto gen_params = gen.params();
  auto critic_params = critic.params();

  for (int it = 1; it <= cfg.iterations; ++it) {
    TrainLogRow row;
    row.iteration = it;

    for (int step = 0; step < cfg.critic_steps; ++step) {
      critic.zero_grad();
      const Tensor<T> real = detail::gather<T>(windows, sampler.next());
      const Tensor<T> fake = gen.forward(detail::sample_latents<T>(n, noise), Mode::Train);

      typename Critic<T>::Trace real_trace, fake_trace;
      const double d_real = detail::mean_of(critic.forward(real, &real_trace));
      const double d_fake = detail::mean_of(critic.forward(fake, &fake_trace));
      critic.backward(real_trace, Tensor<T>(Shape{n, 1, 1, 1}, -inv_n), nullptr);
      critic.backward(fake_trace, Tensor<T>(Shape{n, 1, 1, 1}, inv_n), nullptr);
      nn::rmsprop_step<T>(critic_params, opt);
      critic.clip(static_cast<T>(cfg.clip));
      if (observer.after_critic_update) observer.after_critic_update(critic);

      row.wasserstein_estimate = d_real - d_fake;
      row.critic_loss = d_fake - d_real;
    }

    gen.zero_grad();
    typename Generator<T>::Trace gtrace;
    typename Critic<T>::Trace ctrace;
    const Tensor<T> fake = gen.forward(detail::sample_latents<T>(n, noise), Mode::Train, &gtrace);
    const double d_gen = detail::mean_of(critic.forward(fake, &ctrace));
    Tensor<T> dfake;
    critic.backward(ctrace, Tensor<T>(Shape{n, 1, 1, 1}, -inv_n), &dfake, /*param_grads=*/false);
    gen.backward(gtrace, dfake);
    nn::rmsprop_step<T>(gen_params, opt);
    row.generator_loss = -d_gen;

    if (!std::isfinite(row.wasserstein_estimate) || !std::isfinite(row.generator_loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << ": wasserstein=" << row.wasserstein_estimate
          << " critic_loss=" << row.critic_loss << " generator_loss=" << row.generator_loss;
      throw NonFiniteLoss(msg.str());
    }
    gen.set_iterations(it);
    if (observer.on_iteration) observer.on_iteration(row);
  }
  return gen;
}

/// Decodes `count` levels from standard-normal latents drawn with `seed`.
template <typename T>
std::vector<TileGrid> sample_levels(const Generator<T>& gen, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<TileGrid> out;
  out.reserve(count);
  std::vector<T> z(kLatentDim);
  for (int i = 0; i < count; ++i) {
    for (auto& v : z) v = static_cast<T>(normal(rng));
    out.push_back(gen.generate(z));
  }
  return out;
}

}  // namespace lve::gan

#endif  // LVE_GAN_TRAIN_HPP

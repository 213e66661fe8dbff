#ifndef LVE_CMAES_HPP
#define LVE_CMAES_HPP

// CMA-ES with rank-one and rank-mu covariance updates and cumulative step-size
// adaptation, using the usual default strategy parameters. Minimizes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "lve/error.hpp"
#include "lve/parallel.hpp"

namespace lve::cma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kEigenFloor = 1e-12;

struct CmaConfig {
  int dimension = 32;
  int lambda = 14;
  Vector initial_mean;  // empty means the origin
  double sigma0 = 1.0;
  long max_evaluations = 1000;
  std::uint64_t seed = 0;

  int mu() const { return lambda / 2; }

  void validate() const {
    if (dimension < 1) throw InputError("cma: dimension must be >= 1");
    if (lambda < 2) throw InputError("cma: lambda must be >= 2");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw InputError("cma: sigma0 must be positive");
    if (max_evaluations < 1) throw InputError("cma: max_evaluations must be >= 1");
    if (initial_mean.size() != 0 && initial_mean.size() != dimension)
      throw ShapeMismatch("cma: initial mean has " + std::to_string(initial_mean.size()) +
                          " entries, expected " + std::to_string(dimension));
  }
};

/// Agent-based starting point: mean uniform in [-1,1]^n, sigma 2.
inline CmaConfig agent_config(std::uint64_t seed, int dimension = 32) {
  CmaConfig cfg;
  cfg.dimension = dimension;
  cfg.sigma0 = 2.0;
  cfg.seed = seed;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cfg.initial_mean = Vector(dimension);
  for (int i = 0; i < dimension; ++i) cfg.initial_mean[i] = u(rng);
  return cfg;
}

/// Positive, decreasing log weights over the best mu, summing to 1.
inline std::vector<double> recombination_weights(int mu) {
  std::vector<double> w(mu);
  for (int i = 0; i < mu; ++i) w[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= sum;
  return w;
}

class CmaState {
 public:
  explicit CmaState(const CmaConfig& cfg) : n_(cfg.dimension), lambda_(cfg.lambda), mu_(cfg.mu()) {
    cfg.validate();
    weights_ = recombination_weights(mu_);
    double sq = 0.0;
    for (double w : weights_) sq += w * w;
    mueff_ = 1.0 / sq;
    const double n = n_;
    cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
    cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
    c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
    cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
    damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
    chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    mean_ = cfg.initial_mean.size() ? cfg.initial_mean : Vector::Zero(n_);
    sigma_ = cfg.sigma0;
    cov_ = Matrix::Identity(n_, n_);
    basis_ = Matrix::Identity(n_, n_);
    scales_ = Vector::Ones(n_);
    eigenvalues_ = Vector::Ones(n_);
    ps_ = Vector::Zero(n_);
    pc_ = Vector::Zero(n_);
  }

  int dimension() const { return n_; }
  int lambda() const { return lambda_; }
  int mu() const { return mu_; }
  const std::vector<double>& weights() const { return weights_; }
  const Vector& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const Matrix& covariance() const { return cov_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  long generation() const { return generation_; }
  long evaluations() const { return evaluations_; }

  /// Draws lambda candidates m + sigma * B D N(0, I).
  template <typename Rng>
  std::vector<Vector> ask(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vector> out;
    out.reserve(lambda_);
    for (int k = 0; k < lambda_; ++k) {
      Vector z(n_);
      for (int i = 0; i < n_; ++i) z[i] = normal(rng);
      out.push_back(mean_ + sigma_ * (basis_ * scales_.cwiseProduct(z)));
    }
    return out;
  }

  void tell(const std::vector<Vector>& candidates, const std::vector<double>& fitness) {
    if (candidates.size() != static_cast<std::size_t>(lambda_) || fitness.size() != candidates.size())
      throw ShapeMismatch("cma: tell expects " + std::to_string(lambda_) + " candidates and fitnesses");
    for (std::size_t i = 0; i < fitness.size(); ++i)
      if (!std::isfinite(fitness[i])) throw NonFiniteFitness("cma: fitness of candidate " + std::to_string(i));

    const std::vector<int> order = rank(fitness);
    const Vector old_mean = mean_;
    mean_ = Vector::Zero(n_);
    for (int i = 0; i < mu_; ++i) mean_ += weights_[i] * candidates[order[i]];

    const Vector step = (mean_ - old_mean) / sigma_;
    const Vector whitened = basis_ * (basis_.transpose() * step).cwiseQuotient(scales_);
    ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * whitened;
    ++generation_;
    evaluations_ += lambda_;
    const double ps_norm = ps_.norm();
    const double decay = 1.0 - std::pow(1.0 - cs_, 2.0 * generation_);
    const bool hsig = ps_norm / std::sqrt(decay) / chi_n_ < 1.4 + 2.0 / (n_ + 1.0);
    pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * step;

    Matrix rank_mu = Matrix::Zero(n_, n_);
    for (int i = 0; i < mu_; ++i) {
      const Vector y = (candidates[order[i]] - old_mean) / sigma_;
      rank_mu.noalias() += weights_[i] * y * y.transpose();
    }
    const double hsig_fix = hsig ? 0.0 : cc_ * (2.0 - cc_);
    cov_ = (1.0 - c1_ - cmu_) * cov_ + c1_ * (pc_ * pc_.transpose() + hsig_fix * cov_) + cmu_ * rank_mu;
    symmetrize();

    sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1.0));
    if (!std::isfinite(sigma_) || !(sigma_ > 0.0))
      throw NumericError("cma: step size left the positive finite range");
    decompose();
  }

  /// Candidate indices sorted by fitness, ties broken by index.
  static std::vector<int> rank(const std::vector<double>& fitness) {
    std::vector<int> order(fitness.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fitness[a] < fitness[b]; });
    return order;
  }

 private:
  void symmetrize() {
    const Matrix t = cov_.transpose();
    cov_ = 0.5 * (cov_ + t);
  }

  bool try_decompose() {
    if (!cov_.allFinite()) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov_);
    if (solver.info() != Eigen::Success) return false;
    Vector ev = solver.eigenvalues();
    bool repaired = false;
    for (int i = 0; i < n_; ++i)
      if (!(ev[i] >= kEigenFloor)) {
        ev[i] = kEigenFloor;
        repaired = true;
      }
    basis_ = solver.eigenvectors();
    eigenvalues_ = ev;
    scales_ = ev.cwiseSqrt();
    if (repaired) {
      cov_ = basis_ * ev.asDiagonal() * basis_.transpose();
      symmetrize();
    }
    return true;
  }

  void decompose() {
    if (try_decompose()) return;
    // Repair: keep the finite diagonal, floored, and retry once.
    Matrix repaired = Matrix::Identity(n_, n_);
    for (int i = 0; i < n_; ++i) {
      const double d = cov_(i, i);
      repaired(i, i) = std::isfinite(d) ? std::max(d, kEigenFloor) : 1.0;
    }
    cov_ = repaired;
    if (!try_decompose()) throw CovarianceDecompositionFailure("cma: covariance decomposition failed after repair");
  }

  int n_, lambda_, mu_;
  std::vector<double> weights_;
  double mueff_, cc_, cs_, c1_, cmu_, damps_, chi_n_;
  Vector mean_;
  double sigma_;
  Matrix cov_, basis_;
  Vector scales_, eigenvalues_;
  Vector ps_, pc_;
  long generation_ = 0;
  long evaluations_ = 0;
};

struct HistoryRow {
  long generation;
  long evaluations;
  double best_fitness;  // best so far
  double mean_fitness;  // mean over this generation
};

inline void write_history_header(std::ostream& out) { out << "generation,evaluations,best_fitness,mean_fitness\n"; }
inline void write_history_row(std::ostream& out, const HistoryRow& r) {
  out << r.generation << ',' << r.evaluations << ',' << r.best_fitness << ',' << r.mean_fitness << '\n';
}

template <typename R>
double fitness_of(const R& r) {
  if constexpr (std::is_arithmetic_v<R>)
    return static_cast<double>(r);
  else
    return r.fitness;
}

/// Objective results are either a plain number or a record with a `fitness` field.
template <typename R>
struct OptimizeResult {
  Vector best;
  double best_fitness = 0.0;
  R best_record{};
  std::vector<HistoryRow> history;
  long evaluations = 0;
};

template <typename R>
struct OptimizeOptions {
  int workers = 1;
  /// Called in candidate order after each generation: (evaluation index from 1, candidate, result).
  std::function<void(long, const Vector&, const R&)> on_evaluation;
  std::function<void(const HistoryRow&, const CmaState&)> on_generation;
};

template <typename Objective, typename R = std::decay_t<std::invoke_result_t<Objective&, const Vector&>>>
OptimizeResult<R> optimize(Objective&& objective, const CmaConfig& cfg, const OptimizeOptions<R>& opts = {}) {
  CmaState state(cfg);
  std::mt19937_64 rng(cfg.seed);
  OptimizeResult<R> result;
  result.best_fitness = std::numeric_limits<double>::infinity();
  while (state.evaluations() < cfg.max_evaluations) {
    const std::vector<Vector> candidates = state.ask(rng);
    std::vector<R> records(candidates.size());
    parallel_for(candidates.size(), opts.workers, [&](std::size_t i) { records[i] = objective(candidates[i]); });
    std::vector<double> fitness(records.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      fitness[i] = fitness_of(records[i]);
      if (!std::isfinite(fitness[i])) throw NonFiniteFitness("cma: objective returned a non-finite value");
      sum += fitness[i];
      if (opts.on_evaluation) opts.on_evaluation(state.evaluations() + static_cast<long>(i) + 1, candidates[i], records[i]);
      if (fitness[i] < result.best_fitness || result.best.size() == 0) {
        result.best_fitness = fitness[i];
        result.best = candidates[i];
        result.best_record = records[i];
      }
    }
    state.tell(candidates, fitness);
    const HistoryRow row{state.generation(), state.evaluations(), result.best_fitness,
                         sum / static_cast<double>(fitness.size())};
    result.history.push_back(row);
    if (opts.on_generation) opts.on_generation(row, state);
  }
  result.evaluations = state.evaluations();
  return result;
}

}  // namespace lve::cma

#endif  // LVE_CMAES_HPP

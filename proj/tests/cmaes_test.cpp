#include "lve/cmaes.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

namespace lve::cma {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Two-sided one-sample KS p-value, asymptotic Kolmogorov series with the
/// Stephens small-sample correction.
double ks_pvalue(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) q += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

double sphere(const Vector& x) { return x.squaredNorm(); }

TEST(CmaConfig, Defaults) {
  const CmaConfig cfg;
  EXPECT_EQ(cfg.lambda, 14);
  EXPECT_EQ(cfg.mu(), 7);
  EXPECT_EQ(cfg.dimension, 32);
  EXPECT_EQ(cfg.max_evaluations, 1000);
  EXPECT_EQ(cfg.sigma0, 1.0);
  CmaConfig bad;
  bad.lambda = 1;
  EXPECT_THROW(bad.validate(), InputError);
  bad = CmaConfig{};
  bad.sigma0 = 0.0;
  EXPECT_THROW(bad.validate(), InputError);
}

TEST(CmaConfig, AgentStartingPoint) {
  const CmaConfig cfg = agent_config(5);
  EXPECT_EQ(cfg.sigma0, 2.0);
  ASSERT_EQ(cfg.initial_mean.size(), 32);
  for (int i = 0; i < 32; ++i) {
    EXPECT_GE(cfg.initial_mean[i], -1.0);
    EXPECT_LE(cfg.initial_mean[i], 1.0);
  }
  EXPECT_EQ(agent_config(5).initial_mean, cfg.initial_mean);
  EXPECT_NE(agent_config(6).initial_mean, cfg.initial_mean);
}

TEST(Weights, PositiveDecreasingSumToOne) {
  for (int mu : {1, 2, 7, 20}) {
    const auto w = recombination_weights(mu);
    double sum = 0.0;
    for (int i = 0; i < mu; ++i) {
      EXPECT_GT(w[i], 0.0);
      if (i) {
        EXPECT_LT(w[i], w[i - 1]);
      }
      sum += w[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-15);
  }
}

TEST(Ask, PopulationShape) {
  const CmaState s{CmaConfig{}};
  std::mt19937_64 rng(1);
  const auto c = s.ask(rng);
  ASSERT_EQ(c.size(), 14u);
  for (const auto& v : c) EXPECT_EQ(v.size(), 32);
}

TEST(Ask, VanishingStepSizeReturnsMean) {
  CmaConfig cfg;
  cfg.sigma0 = 1e-300;
  cfg.initial_mean = Vector::LinSpaced(32, -2.0, 3.0);
  const CmaState s(cfg);
  std::mt19937_64 rng(2);
  for (const auto& v : s.ask(rng)) EXPECT_EQ(v, cfg.initial_mean);
}

TEST(Ask, SamplesAreStandardNormalUnderIdentity) {
  const CmaState s{CmaConfig{}};
  std::mt19937_64 rng(3);
  std::vector<double> draws;
  while (draws.size() < 10000)
    for (const auto& v : s.ask(rng))
      for (int i = 0; i < v.size() && draws.size() < 10000; ++i) draws.push_back(v[i]);
  EXPECT_GT(ks_pvalue(draws), 0.01);

  // The oracle itself rejects a shifted sample.
  for (double& d : draws) d += 0.1;
  EXPECT_LT(ks_pvalue(draws), 0.01);
}

TEST(Ask, DeterministicGivenSeed) {
  const CmaState s{CmaConfig{}};
  std::mt19937_64 a(9), b(9);
  EXPECT_EQ(s.ask(a), s.ask(b));
}

TEST(Tell, TiesFallBackToIndexOrder) {
  CmaConfig cfg;
  cfg.dimension = 3;
  CmaState s(cfg);
  std::mt19937_64 rng(4);
  const auto c = s.ask(rng);
  s.tell(c, std::vector<double>(c.size(), 1.0));
  Vector expected = Vector::Zero(3);
  for (int i = 0; i < s.mu(); ++i) expected += s.weights()[i] * c[i];
  EXPECT_TRUE(s.mean().isApprox(expected, 1e-14));
  EXPECT_EQ(CmaState::rank({2.0, 1.0, 1.0, 0.5}), (std::vector<int>{3, 1, 2, 0}));
}

TEST(Tell, RejectsNonFiniteAndWrongCount) {
  CmaState s{CmaConfig{}};
  std::mt19937_64 rng(5);
  const auto c = s.ask(rng);
  std::vector<double> f(c.size(), 0.0);
  f[3] = std::nan("");
  EXPECT_THROW(s.tell(c, f), NonFiniteFitness);
  f[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(s.tell(c, f), NonFiniteFitness);
  EXPECT_THROW(s.tell({c[0]}, {0.0}), ShapeMismatch);
}

TEST(Optimize, SphereConvergesInMostSeeds) {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CmaConfig cfg;
    cfg.max_evaluations = 10000;
    cfg.seed = seed;
    if (optimize(sphere, cfg).best_fitness < 1e-8) ++successes;
  }
  EXPECT_GE(successes, 9);
}

TEST(Optimize, OneDimensionalQuadratic) {
  CmaConfig cfg;
  cfg.dimension = 1;
  cfg.seed = 7;
  CmaState const* last = nullptr;
  Vector final_mean;
  OptimizeOptions<double> opts;
  opts.on_generation = [&](const HistoryRow&, const CmaState& s) {
    last = &s;
    final_mean = s.mean();
  };
  const auto r = optimize([](const Vector& x) { return (x[0] - 3.0) * (x[0] - 3.0); }, cfg, opts);
  ASSERT_NE(last, nullptr);
  EXPECT_NEAR(final_mean[0], 3.0, 1e-4);
  EXPECT_NEAR(r.best[0], 3.0, 1e-4);
}

TEST(Optimize, ConstantObjectiveHasFlatHistory) {
  CmaConfig cfg;
  cfg.seed = 8;
  const auto r = optimize([](const Vector&) { return 4.25; }, cfg);
  EXPECT_EQ(r.best.size(), 32);
  EXPECT_EQ(r.best_fitness, 4.25);
  for (const auto& row : r.history) {
    EXPECT_EQ(row.best_fitness, 4.25);
    EXPECT_EQ(row.mean_fitness, 4.25);
  }
}

TEST(Optimize, BudgetGranularity) {
  for (long budget : {1L, 13L, 14L, 15L, 1000L}) {
    CmaConfig cfg;
    cfg.max_evaluations = budget;
    const auto r = optimize(sphere, cfg);
    EXPECT_GE(r.evaluations, budget);
    EXPECT_LT(r.evaluations, budget + cfg.lambda);
    EXPECT_EQ(r.evaluations % cfg.lambda, 0);
  }
}

TEST(Optimize, CovarianceStaysSpdAndHistoryMonotone) {
  auto rosenbrock = [](const Vector& x) {
    double f = 0.0;
    for (int i = 0; i + 1 < x.size(); ++i)
      f += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
    return f;
  };
  CmaConfig cfg;
  cfg.dimension = 10;
  cfg.max_evaluations = 5000;
  cfg.seed = 11;
  OptimizeOptions<double> opts;
  int generations = 0;
  opts.on_generation = [&](const HistoryRow&, const CmaState& s) {
    ++generations;
    const Matrix& c = s.covariance();
    ASSERT_EQ(c, c.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
    ASSERT_GT(eig.eigenvalues().minCoeff(), 0.0);
    ASSERT_GT(s.sigma(), 0.0);
  };
  const auto r = optimize(rosenbrock, cfg, opts);
  EXPECT_GT(generations, 300);
  for (std::size_t i = 1; i < r.history.size(); ++i)
    EXPECT_LE(r.history[i].best_fitness, r.history[i - 1].best_fitness);
  EXPECT_LT(r.best_fitness, rosenbrock(Vector::Zero(10)));
}

TEST(Optimize, DeterministicAndWorkerCountInvariant) {
  CmaConfig cfg;
  cfg.seed = 12;
  const auto a = optimize(sphere, cfg);
  const auto b = optimize(sphere, cfg);
  OptimizeOptions<double> par;
  par.workers = 4;
  const auto c = optimize(sphere, cfg, par);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.best, c.best);
  EXPECT_EQ(a.best_fitness, c.best_fitness);
}

TEST(Optimize, RecordObjectivesAndEvaluationCallback) {
  struct Record {
    double fitness = 0.0;
    int tag = 0;
  };
  CmaConfig cfg;
  cfg.max_evaluations = 28;
  std::vector<long> indices;
  OptimizeOptions<Record> opts;
  opts.on_evaluation = [&](long i, const Vector&, const Record& r) {
    indices.push_back(i);
    EXPECT_EQ(r.tag, 7);
  };
  const auto r = optimize([](const Vector& x) { return Record{x.squaredNorm(), 7}; }, cfg, opts);
  ASSERT_EQ(indices.size(), 28u);
  for (long i = 0; i < 28; ++i) EXPECT_EQ(indices[i], i + 1);
  EXPECT_EQ(r.best_record.fitness, r.best_fitness);
}

TEST(Optimize, ObjectiveExceptionsPropagate) {
  CmaConfig cfg;
  OptimizeOptions<double> opts;
  opts.workers = 3;
  EXPECT_THROW(optimize([](const Vector&) -> double { throw IoError("boom"); }, cfg, opts), IoError);
  EXPECT_THROW(optimize([](const Vector&) { return std::nan(""); }, cfg), NonFiniteFitness);
}

TEST(History, CsvLayout) {
  std::ostringstream out;
  write_history_header(out);
  write_history_row(out, {3, 42, 0.5, 1.25});
  EXPECT_EQ(out.str(), "generation,evaluations,best_fitness,mean_fitness\n3,42,0.5,1.25\n");
}

}  // namespace
}  // namespace lve::cma

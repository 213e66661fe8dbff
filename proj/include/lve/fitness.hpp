#ifndef LVE_FITNESS_HPP
#define LVE_FITNESS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lve/cmaes.hpp"
#include "lve/corpus.hpp"
#include "lve/gan/networks.hpp"
#include "lve/sim/astar.hpp"

namespace lve::fitness {

using cma::Vector;
using Model = gan::Generator<float>;

inline constexpr double kEnemyGoal = 20.0;
inline constexpr double kEnemyWeight = 0.5;
inline constexpr double kFailureOffset = 60.0;

/// Fraction of the bottom row made of ground (id 0) tiles.
inline double measure_ground(const TileGrid& grid) {
  if (grid.width() < 1 || grid.height() < 1) throw ShapeMismatch("measure_ground: empty grid");
  int count = 0;
  for (int c = 0; c < grid.width(); ++c) count += grid.at(grid.height() - 1, c) == Tile::Solid;
  return static_cast<double>(count) / grid.width();
}

inline void check_target(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("ground target must lie in [0, 1], got " + std::to_string(t));
}

inline double f_ground(double g, double t) { return std::abs(g - t); }
inline double f_ground(const TileGrid& grid, double t) {
  check_target(t);
  return f_ground(measure_ground(grid), t);
}

inline int count_enemies(const TileGrid& grid) {
  int n = 0;
  for (auto v : grid.cells()) n += v == static_cast<std::uint8_t>(Tile::Enemy);
  return n;
}

inline double f_segment(double ground_term, int enemies, bool enemies_enabled) {
  return enemies_enabled ? ground_term + kEnemyWeight * (kEnemyGoal - enemies) : ground_term;
}
inline double f_segment(const TileGrid& grid, double t, bool enemies_enabled) {
  return f_segment(f_ground(grid, t), count_enemies(grid), enemies_enabled);
}

struct SegmentSpec {
  double target = 1.0;
  bool enemies = false;

  bool operator==(const SegmentSpec&) const = default;
};
using SegmentPlan = std::vector<SegmentSpec>;

/// "1.0,1.0,0.7,0.7e,0.7e": one ground target per segment, `e` adds the enemy term.
inline SegmentPlan parse_plan(const std::string& text) {
  SegmentPlan plan;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char ch) { return std::isspace(ch); }), item.end());
    if (item.empty()) throw InputError("segment plan has an empty entry: '" + text + "'");
    SegmentSpec s;
    if (item.back() == 'e' || item.back() == 'E') {
      s.enemies = true;
      item.pop_back();
    }
    std::size_t used = 0;
    try {
      s.target = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.empty()) throw InputError("bad segment target '" + item + "' in plan");
    check_target(s.target);
    plan.push_back(s);
  }
  if (plan.empty()) throw EmptyPlan();
  return plan;
}

inline std::string plan_string(const SegmentPlan& plan) {
  std::ostringstream out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (i) out << ',';
    out << plan[i].target << (plan[i].enemies ? "e" : "");
  }
  return out.str();
}

inline SegmentPlan difficulty_ramp_plan() { return {{1.0, false}, {1.0, false}, {0.7, false}, {0.7, true}, {0.7, true}}; }

/// Decodes a raw latent vector.
inline TileGrid decode_latent(const Model& model, const Vector& z) {
  std::vector<float> v(static_cast<std::size_t>(z.size()));
  for (int i = 0; i < z.size(); ++i) v[i] = static_cast<float>(z[i]);
  return model.generate(v);
}

/// Sigmoid map onto [-1, 1]^n used for agent-based search.
inline Vector squash(const Vector& z) {
  Vector out(z.size());
  for (int i = 0; i < z.size(); ++i) out[i] = 2.0 / (1.0 + std::exp(-z[i])) - 1.0;
  return out;
}

/// Every objective reports through this record; agent fields stay empty otherwise.
struct Evaluation {
  double fitness = 0.0;
  std::optional<double> p_mean, jumps_mean, playable_fraction;
  std::optional<double> ground;
  std::optional<int> enemies;
};

inline void write_evaluation_header(std::ostream& out) { out << "evaluation,fitness,p_mean,jumps_mean,playable_fraction\n"; }
inline void write_evaluation_row(std::ostream& out, long index, const Evaluation& e) {
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  out << index << ',' << e.fitness << ',';
  opt(e.p_mean);
  out << ',';
  opt(e.jumps_mean);
  out << ',';
  opt(e.playable_fraction);
  out << '\n';
}

inline Evaluation evaluate_segment(const TileGrid& level, const SegmentSpec& spec) {
  Evaluation e;
  e.ground = measure_ground(level);
  e.enemies = count_enemies(level);
  e.fitness = f_segment(f_ground(*e.ground, spec.target), *e.enemies, spec.enemies);
  return e;
}

struct SegmentOutcome {
  SegmentSpec spec;
  Vector latent;
  TileGrid level;
  Evaluation best;
  std::vector<cma::HistoryRow> history;
};

struct SegmentedLevel {
  TileGrid level;
  std::vector<SegmentOutcome> segments;
};

struct SearchOptions {
  int workers = 1;
  /// (segment index, evaluation index, result) for every evaluation in order.
  std::function<void(std::size_t, long, const Evaluation&)> on_evaluation;
  std::function<void(std::size_t, const cma::HistoryRow&)> on_generation;
};

/// One independent CMA-ES per segment, seeded cfg.seed + index, then the
/// best segments are joined left to right.
inline SegmentedLevel evolve_segmented_level(const SegmentPlan& plan, const Model& model, const cma::CmaConfig& cfg,
                                             const SearchOptions& opts = {}) {
  if (plan.empty()) throw EmptyPlan();
  SegmentedLevel out;
  std::vector<TileGrid> parts;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const SegmentSpec spec = plan[i];
    check_target(spec.target);
    cma::CmaConfig seg_cfg = cfg;
    seg_cfg.seed = cfg.seed + i;
    cma::OptimizeOptions<Evaluation> o;
    o.workers = opts.workers;
    if (opts.on_evaluation) o.on_evaluation = [&](long k, const Vector&, const Evaluation& e) { opts.on_evaluation(i, k, e); };
    if (opts.on_generation) o.on_generation = [&](const cma::HistoryRow& row, const cma::CmaState&) { opts.on_generation(i, row); };
    const auto r = cma::optimize([&](const Vector& z) { return evaluate_segment(decode_latent(model, z), spec); }, seg_cfg, o);
    SegmentOutcome seg{spec, r.best, decode_latent(model, r.best), r.best_record, r.history};
    parts.push_back(seg.level);
    out.segments.push_back(std::move(seg));
  }
  out.level = concat_columns(parts);
  return out;
}

enum class AgentVariant { MaximizeJumps, MinimizeJumps };

struct AgentObjective {
  AgentVariant variant = AgentVariant::MaximizeJumps;
  int repeats = 10;
  std::uint64_t seed_base = 0;
  sim::AstarConfig astar{};

  void validate() const {
    if (repeats < 1) throw InputError("agent objective needs at least one repeat");
  }
};

/// Score of one simulation run, minimized.
inline double run_score(AgentVariant v, bool completed, double p, int jumps) {
  if (v == AgentVariant::MaximizeJumps) return completed ? -p - jumps : -p;
  return completed ? -p + jumps : -p + kFailureOffset;
}
inline double run_score(AgentVariant v, const sim::SimResult& r) { return run_score(v, r.completed, r.p, r.jumps); }

/// Mean score over `repeats` runs with seeds seed_base + k.
inline Evaluation evaluate_level_with_agent(const TileGrid& level, const AgentObjective& obj) {
  obj.validate();
  const sim::World world(level);
  Evaluation e;
  double score = 0.0, p = 0.0, jumps = 0.0, played = 0.0;
  for (int k = 0; k < obj.repeats; ++k) {
    const sim::SimResult r = sim::astar_solve(world, obj.seed_base + k, obj.astar);
    score += run_score(obj.variant, r);
    p += r.p;
    jumps += r.jumps;
    played += r.completed ? 1.0 : 0.0;
  }
  const double n = obj.repeats;
  e.fitness = score / n;
  e.p_mean = p / n;
  e.jumps_mean = jumps / n;
  e.playable_fraction = played / n;
  e.ground = measure_ground(level);
  e.enemies = count_enemies(level);
  return e;
}

inline Evaluation agent_fitness(const Vector& z, const Model& model, const AgentObjective& obj) {
  return evaluate_level_with_agent(decode_latent(model, squash(z)), obj);
}

}  // namespace lve::fitness

#endif  // LVE_FITNESS_HPP

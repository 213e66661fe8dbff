#ifndef LVE_SIM_ASTAR_HPP
#define LVE_SIM_ASTAR_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <queue>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lve/sim/physics.hpp"

namespace lve::sim {

struct AstarConfig {
  int tick_limit = 0;  // 0: the world's limit
  int jump_cap = kJumpCap;
  long max_expansions = 200000;
  int revisit_cap = 6;  // per spatial state, only used when enemies exist
  bool record_path = false;
};

struct TraceRow {
  int tick;
  int x, y, vy;
  bool grounded;
  Action action;
};

struct SimResult {
  double p = 0.0;
  int jumps = 0;
  bool completed = false;
  int ticks = 0;
  std::uint64_t seed = 0;
  bool timed_out = false;  // expansion budget or tick limit hit before a win
  long expansions = 0;
  std::vector<TraceRow> path;  // filled when record_path is set
};

namespace detail {

struct SearchKey {
  int x, y, vy, grounded, killed, tick;
  bool operator==(const SearchKey&) const = default;
};

struct SearchKeyHash {
  std::size_t operator()(const SearchKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (int v : {k.x, k.y, k.vy, k.grounded, k.killed, k.tick}) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 0x100000001b3ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

struct Node {
  AgentState s;
  int parent;
  Action action;
  int jumps;
  int killed;  // interned killed-set id
};

struct Frontier {
  int f, h, jumps;
  std::uint64_t tie;
  int node;
  bool operator>(const Frontier& o) const {
    if (f != o.f) return f > o.f;
    if (h != o.h) return h > o.h;
    if (jumps != o.jumps) return jumps > o.jumps;
    if (tie != o.tie) return tie > o.tie;
    return node > o.node;
  }
};

class KilledSets {
 public:
  explicit KilledSets(int enemies) : empty_(static_cast<std::size_t>(enemies), 0) { intern(empty_); }
  int intern(const std::vector<std::uint8_t>& set) {
    std::string key(set.begin(), set.end());
    auto [it, inserted] = ids_.try_emplace(std::move(key), static_cast<int>(sets_.size()));
    if (inserted) sets_.push_back(set);
    return it->second;
  }
  const std::vector<std::uint8_t>& get(int id) const { return sets_[id]; }

 private:
  std::vector<std::uint8_t> empty_;
  std::unordered_map<std::string, int> ids_;
  std::vector<std::vector<std::uint8_t>> sets_;
};

}  // namespace detail

/// A* over agent states with g = ticks and h = remaining distance at run speed.
/// Equal-priority nodes are ordered by fewer jumps, then by a seeded random key.
inline SimResult astar_solve(const World& w, std::uint64_t seed, const AstarConfig& cfg = {}) {
  using namespace detail;
  const int tick_limit = cfg.tick_limit > 0 ? std::min(cfg.tick_limit, w.tick_limit()) : w.tick_limit();
  const bool has_enemies = w.enemy_count() > 0;
  const int goal = w.goal_x();
  auto heuristic = [&](int x) { return (goal - x + kRunSpeed - 1) / kRunSpeed; };

  SimResult result;
  result.seed = seed;
  std::mt19937_64 rng(seed);
  KilledSets killed_sets(w.enemy_count());
  std::vector<Node> nodes;
  std::priority_queue<Frontier, std::vector<Frontier>, std::greater<>> open;
  std::unordered_map<SearchKey, int, SearchKeyHash> seen;  // key -> best tick
  std::unordered_map<SearchKey, int, SearchKeyHash> visits;

  auto key_of = [&](const AgentState& s, int killed) {
    return SearchKey{s.x, s.y, s.vy, s.grounded, killed, has_enemies ? s.tick : 0};
  };

  int best_x = w.spawn().x;
  int best_x_node = 0;
  int winner = -1;

  nodes.push_back({w.spawn(), -1, {}, 0, 0});
  seen.emplace(key_of(w.spawn(), 0), 0);
  open.push({heuristic(w.spawn().x), heuristic(w.spawn().x), 0, rng(), 0});

  long expansions = 0;
  bool budget_hit = false;
  bool limit_hit = false;
  while (!open.empty()) {
    const Frontier top = open.top();
    open.pop();
    const Node cur = nodes[top.node];
    if (const auto it = seen.find(key_of(cur.s, cur.killed)); it != seen.end() && it->second < cur.s.tick) continue;
    if (cur.s.tick >= tick_limit) {
      limit_hit = true;
      continue;
    }
    if (has_enemies) {
      int& count = visits[SearchKey{cur.s.x, cur.s.y, cur.s.vy, cur.s.grounded, cur.killed, 0}];
      if (count >= cfg.revisit_cap) continue;
      ++count;
    }
    if (expansions >= cfg.max_expansions) {
      budget_hit = true;
      break;
    }
    ++expansions;

    for (const Action a : kActions) {
      if (a.jump && (!cur.s.grounded || cur.jumps >= cfg.jump_cap)) continue;
      AgentState s = cur.s;
      const StepOutcome o = step(w, s, a, killed_sets.get(cur.killed));
      if (o.died) continue;
      int killed = cur.killed;
      if (o.stomp_count > 0) {
        std::vector<std::uint8_t> set = killed_sets.get(cur.killed);
        for (int k = 0; k < o.stomp_count; ++k) set[o.stomped[k]] = 1;
        killed = killed_sets.intern(set);
      }
      const int jumps = cur.jumps + (o.jumped ? 1 : 0);
      const int h = heuristic(s.x);
      if (s.tick + h > tick_limit) {
        limit_hit = true;
        continue;
      }
      const SearchKey key = key_of(s, killed);
      auto [it, inserted] = seen.try_emplace(key, s.tick);
      if (!inserted) {
        if (it->second <= s.tick) continue;
        it->second = s.tick;
      }
      const int id = static_cast<int>(nodes.size());
      nodes.push_back({s, top.node, a, jumps, killed});
      if (s.x > best_x) {
        best_x = s.x;
        best_x_node = id;
      }
      if (o.won) {
        winner = id;
        break;
      }
      open.push({s.tick + h, h, jumps, rng(), id});
    }
    if (winner >= 0) break;
  }

  const int end = winner >= 0 ? winner : best_x_node;
  result.expansions = expansions;
  result.completed = winner >= 0;
  result.timed_out = !result.completed && (budget_hit || limit_hit);
  result.p = result.completed ? 1.0 : progress(w, best_x);
  result.jumps = nodes[end].jumps;
  result.ticks = nodes[end].s.tick;
  if (cfg.record_path) {
    for (int n = end; n > 0; n = nodes[n].parent) {
      const Node& nd = nodes[n];
      result.path.push_back({nd.s.tick, nd.s.x, nd.s.y, nd.s.vy, nd.s.grounded, nd.action});
    }
    std::reverse(result.path.begin(), result.path.end());
  }
  return result;
}

/// One A* run per seed.
inline std::vector<SimResult> simulate(const World& w, const std::vector<std::uint64_t>& seeds,
                                       const AstarConfig& cfg = {}) {
  std::vector<SimResult> out;
  out.reserve(seeds.size());
  for (auto s : seeds) out.push_back(astar_solve(w, s, cfg));
  return out;
}

inline void write_results_header(std::ostream& out) { out << "seed,completed,p,jumps,ticks,timed_out\n"; }
inline void write_result_row(std::ostream& out, const SimResult& r) {
  out << r.seed << ',' << (r.completed ? 1 : 0) << ',' << r.p << ',' << r.jumps << ',' << r.ticks << ','
      << (r.timed_out ? 1 : 0) << '\n';
}

inline void write_trace(std::ostream& out, const std::vector<TraceRow>& rows) {
  out << "tick,x,y,vy,grounded,action\n";
  for (const auto& r : rows)
    out << r.tick << ',' << r.x << ',' << r.y << ',' << r.vy << ',' << (r.grounded ? 1 : 0) << ','
        << action_name(r.action) << '\n';
}

}  // namespace lve::sim

#endif  // LVE_SIM_ASTAR_HPP

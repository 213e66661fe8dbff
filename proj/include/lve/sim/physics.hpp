#ifndef LVE_SIM_PHYSICS_HPP
#define LVE_SIM_PHYSICS_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "lve/sim/world.hpp"

namespace lve::sim {

struct Action {
  int dx = 0;  // -1 left, 0 none, +1 right
  bool jump = false;

  bool operator==(const Action&) const = default;
};

/// Running right comes first.
inline constexpr std::array<Action, 6> kActions{{{1, false}, {1, true}, {0, false}, {0, true}, {-1, false}, {-1, true}}};

inline std::string action_name(Action a) {
  std::string s = a.dx > 0 ? "right" : (a.dx < 0 ? "left" : "none");
  if (a.jump) s += "+jump";
  return s;
}

struct StepOutcome {
  bool jumped = false;
  bool died = false;
  bool won = false;
  int stomp_count = 0;
  std::array<int, 8> stomped{};  // enemy indices killed this tick
};

/// `killed[i]` marks enemies already stomped; may be empty when the world has none.
inline StepOutcome step(const World& w, AgentState& s, Action a, const std::vector<std::uint8_t>& killed) {
  StepOutcome out;
  ++s.tick;

  if (a.dx != 0) {
    const int nx = s.x + a.dx * kRunSpeed;
    if (nx >= 0 && nx <= w.goal_x() && !w.blocked(nx, s.y)) s.x = nx;
  }

  if (s.grounded && !w.blocked(s.x, s.y + 1)) {
    s.grounded = false;
    s.vy = 0;
  }
  if (s.grounded && a.jump) {
    s.vy = kJumpImpulse;
    s.grounded = false;
    out.jumped = true;
  } else if (!s.grounded) {
    s.vy = std::min(s.vy + 1, kTerminalVelocity);
  }

  const bool falling = s.vy > 0;
  const int dir = s.vy > 0 ? 1 : -1;
  for (int k = 0, n = std::abs(s.vy); k < n; ++k) {
    if (w.blocked(s.x, s.y + dir)) {
      if (dir > 0) s.grounded = true;
      s.vy = 0;
      break;
    }
    s.y += dir;
  }
  if (s.vy != 0 && w.blocked(s.x, s.y + dir)) {
    if (dir > 0) s.grounded = true;
    s.vy = 0;
  }

  for (int i = 0, n = w.enemy_count(); i < n; ++i) {
    if (!killed.empty() && killed[i]) continue;
    const EnemyPos& e = w.enemy(s.tick, i);
    if (!e.alive || std::abs(e.x - s.x) >= kSub || std::abs(e.y - s.y) >= kSub) continue;
    if (falling && s.y < e.y) {
      if (out.stomp_count < static_cast<int>(out.stomped.size())) out.stomped[out.stomp_count++] = i;
    } else {
      out.died = true;
    }
  }
  if (out.stomp_count > 0 && !out.died) {
    s.vy = kStompBounce;
    s.grounded = false;
  }

  if (s.y > w.pit_y()) out.died = true;
  if (!out.died && s.x >= w.goal_x()) out.won = true;
  return out;
}

/// Fraction of the level's width covered by the agent's box.
inline double progress(const World& w, int x) {
  return std::min(1.0, static_cast<double>(x + kSub) / static_cast<double>(w.width() * kSub));
}

}  // namespace lve::sim

#endif  // LVE_SIM_PHYSICS_HPP

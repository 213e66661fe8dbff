#ifndef LVE_SIM_WORLD_HPP
#define LVE_SIM_WORLD_HPP

#include <cstdint>
#include <vector>

#include "lve/corpus.hpp"

namespace lve::sim {

inline constexpr int kSub = 8;  // subunits per tile
inline constexpr int kRunSpeed = 2;
inline constexpr int kJumpImpulse = -8;
inline constexpr int kTerminalVelocity = 8;
inline constexpr int kStompBounce = -4;
inline constexpr int kJumpCap = 50;
inline constexpr int kTicksPerColumn = 100;

/// Floor division for possibly negative subunit coordinates.
constexpr int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

/// Everything except Empty and Enemy blocks movement; pipes act like ground.
constexpr bool is_solid(Tile t) { return t != Tile::Empty && t != Tile::Enemy; }

struct AgentState {
  int x = 0;  // left edge, subunits
  int y = 0;  // top edge, subunits; y grows downward
  int vy = 0;
  bool grounded = false;
  int tick = 0;
};

struct EnemyPos {
  std::int16_t x = 0;
  std::int16_t y = 0;
  bool alive = false;  // false once it has fallen out of the map
};

class World {
 public:
  World() = default;

  /// Enemy cells become passable and spawn a walker there. `tick_limit` 0
  /// means the default of 100 ticks per column.
  explicit World(const TileGrid& grid, int tick_limit = 0)
      : grid_(grid), width_(grid.width()), height_(grid.height()) {
    if (width_ < 1 || height_ < 1) throw ShapeMismatch("cannot simulate an empty grid");
    tick_limit_ = tick_limit > 0 ? tick_limit : kTicksPerColumn * width_;
    solid_.assign(static_cast<std::size_t>(width_) * height_, 0);
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c) {
        const Tile t = grid.at(r, c);
        if (t == Tile::Enemy) spawns_.push_back({static_cast<std::int16_t>(c * kSub), static_cast<std::int16_t>(r * kSub), true});
        solid_[r * width_ + c] = is_solid(t);
      }
    spawn_ = AgentState{};
    spawn_.y = 0;
    spawn_.grounded = false;
    for (int r = 0; r < height_; ++r)
      if (solid_cell(r, 0)) {
        spawn_.y = (r - 1) * kSub;
        spawn_.grounded = true;
        break;
      }
    build_timeline();
  }

  const TileGrid& grid() const { return grid_; }
  int width() const { return width_; }
  int height() const { return height_; }
  int tick_limit() const { return tick_limit_; }
  int goal_x() const { return (width_ - 1) * kSub; }
  int pit_y() const { return (height_ - 1) * kSub; }
  const AgentState& spawn() const { return spawn_; }
  int enemy_count() const { return static_cast<int>(spawns_.size()); }

  /// Rows outside the map are open; columns outside it are walls.
  bool solid_cell(int r, int c) const {
    if (c < 0 || c >= width_) return true;
    if (r < 0 || r >= height_) return false;
    return solid_[r * width_ + c] != 0;
  }

  /// Whether an 8x8 box with top-left (x, y) overlaps any solid cell.
  bool blocked(int x, int y) const {
    const int c0 = floor_div(x, kSub), c1 = floor_div(x + kSub - 1, kSub);
    const int r0 = floor_div(y, kSub), r1 = floor_div(y + kSub - 1, kSub);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c)
        if (solid_cell(r, c)) return true;
    return false;
  }

  /// Position of enemy i after `tick` updates, ignoring stomps.
  const EnemyPos& enemy(int tick, int i) const {
    const int t = tick < 0 ? 0 : (tick > tick_limit_ ? tick_limit_ : tick);
    return timeline_[static_cast<std::size_t>(t) * spawns_.size() + i];
  }

 private:
  struct Walker {
    int x, y, vy, dir;
    bool alive;
  };

  void advance(Walker& e) const {
    if (!e.alive) return;
    const int nx = e.x + e.dir;
    if (nx < 0 || nx > goal_x() || blocked(nx, e.y))
      e.dir = -e.dir;
    else
      e.x = nx;
    if (blocked(e.x, e.y + 1)) {
      e.vy = 0;
    } else {
      e.vy = std::min(e.vy + 1, kTerminalVelocity);
      for (int k = 0; k < e.vy; ++k) {
        if (blocked(e.x, e.y + 1)) {
          e.vy = 0;
          break;
        }
        ++e.y;
      }
    }
    if (e.y >= height_ * kSub) e.alive = false;
  }

  // Walker trajectories depend on the grid alone.
  void build_timeline() {
    const std::size_t n = spawns_.size();
    timeline_.resize((static_cast<std::size_t>(tick_limit_) + 1) * n);
    std::vector<Walker> walkers;
    for (const auto& s : spawns_) walkers.push_back({s.x, s.y, 0, -1, true});
    for (int t = 0; t <= tick_limit_; ++t) {
      if (t > 0)
        for (auto& w : walkers) advance(w);
      for (std::size_t i = 0; i < n; ++i)
        timeline_[t * n + i] = {static_cast<std::int16_t>(walkers[i].x), static_cast<std::int16_t>(walkers[i].y),
                                walkers[i].alive};
    }
  }

  TileGrid grid_;
  int width_ = 0, height_ = 0, tick_limit_ = 0;
  std::vector<std::uint8_t> solid_;
  std::vector<EnemyPos> spawns_;
  std::vector<EnemyPos> timeline_;
  AgentState spawn_;
};

inline World build_world(const TileGrid& grid, int tick_limit = 0) { return World(grid, tick_limit); }

}  // namespace lve::sim

#endif  // LVE_SIM_WORLD_HPP

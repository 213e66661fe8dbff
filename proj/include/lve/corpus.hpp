#ifndef LVE_CORPUS_HPP
#define LVE_CORPUS_HPP

// Tile-grid representation of VGLC platformer levels and the one-hot window
// encoding the GAN consumes and emits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lve/error.hpp"

namespace lve {

enum class Tile : std::uint8_t {
  Solid = 0,
  Breakable = 1,
  Empty = 2,
  FullQuestion = 3,
  EmptyQuestion = 4,
  Enemy = 5,
  PipeTopLeft = 6,
  PipeTopRight = 7,
  PipeLeft = 8,
  PipeRight = 9,
};

inline constexpr int kTileCount = 10;
inline constexpr std::string_view kTileSymbols = "XS-?QE<>[]";

inline constexpr char tile_symbol(Tile t) { return kTileSymbols[static_cast<int>(t)]; }

inline constexpr int tile_from_symbol(char c) {
  for (int i = 0; i < kTileCount; ++i)
    if (kTileSymbols[i] == c) return i;
  return -1;
}

/// Row-major matrix of tile identities. Row 0 is the top of the level.
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(int height, int width, Tile fill = Tile::Empty)
      : height_(height), width_(width),
        cells_(static_cast<std::size_t>(height) * width, static_cast<std::uint8_t>(fill)) {
    if (height < 1 || width < 1) throw InputError("tile grid dimensions must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }

  Tile at(int row, int col) const { return static_cast<Tile>(cells_[index(row, col)]); }
  void set(int row, int col, Tile t) { cells_[index(row, col)] = static_cast<std::uint8_t>(t); }
  int id(int row, int col) const { return cells_[index(row, col)]; }

  std::span<const std::uint8_t> cells() const { return cells_; }

  /// Columns [first, first + count) as a new grid.
  TileGrid columns(int first, int count) const {
    if (first < 0 || count < 1 || first + count > width_) throw InputError("column range out of bounds");
    TileGrid out(height_, count);
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < count; ++c) out.set(r, c, at(r, first + c));
    return out;
  }

  friend bool operator==(const TileGrid&, const TileGrid&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Horizontal concatenation; all parts must share a height.
inline TileGrid concat_columns(std::span<const TileGrid> parts) {
  if (parts.empty()) throw InputError("nothing to concatenate");
  int width = 0;
  for (const auto& p : parts) {
    if (p.height() != parts.front().height()) throw ShapeMismatch("segment heights differ");
    width += p.width();
  }
  TileGrid out(parts.front().height(), width);
  int offset = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < p.height(); ++r)
      for (int c = 0; c < p.width(); ++c) out.set(r, offset + c, p.at(r, c));
    offset += p.width();
  }
  return out;
}

inline TileGrid parse_vglc(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines.front().empty()) throw InputError("level text is empty");

  const int height = static_cast<int>(lines.size());
  const int width = static_cast<int>(lines.front().size());
  TileGrid grid(height, width);
  for (int r = 0; r < height; ++r) {
    if (static_cast<int>(lines[r].size()) != width) throw RaggedRows(r);
    for (int c = 0; c < width; ++c) {
      const int t = tile_from_symbol(lines[r][c]);
      if (t < 0) throw UnknownSymbol(lines[r][c], r, c);
      grid.set(r, c, static_cast<Tile>(t));
    }
  }
  return grid;
}

/// One line per row, each terminated by '\n'.
inline std::string render_vglc(const TileGrid& grid) {
  std::string out;
  out.reserve(static_cast<std::size_t>(grid.height()) * (grid.width() + 1));
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < grid.width(); ++c) out.push_back(tile_symbol(grid.at(r, c)));
    out.push_back('\n');
  }
  return out;
}

inline TileGrid load_vglc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open level file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_vglc(text);
}

inline void save_vglc(const TileGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write level file: " + path);
  out << render_vglc(grid);
  if (!out) throw IoError("write failed: " + path);
}

// Window geometry. Generated and training levels are one screen wide.
inline constexpr int kLevelHeight = 14;
inline constexpr int kWindowWidth = 28;
inline constexpr int kPaddedSize = 32;
inline constexpr int kWindowValues = kTileCount * kPaddedSize * kPaddedSize;

inline std::vector<TileGrid> slide_windows(const TileGrid& grid, int window_width = kWindowWidth) {
  if (grid.height() != kLevelHeight)
    throw ShapeMismatch("expected a level " + std::to_string(kLevelHeight) + " tiles high, got " +
                        std::to_string(grid.height()));
  if (grid.width() < window_width) throw TooNarrow(grid.width(), window_width);
  std::vector<TileGrid> windows;
  windows.reserve(grid.width() - window_width + 1);
  for (int first = 0; first + window_width <= grid.width(); ++first)
    windows.push_back(grid.columns(first, window_width));
  return windows;
}

/// Channel-major 10x32x32 one-hot tensor. The level occupies the top-left
/// 14x28 block; padding cells hold the empty tile.
struct TrainingWindow {
  std::array<float, kWindowValues> data{};

  float& at(int channel, int row, int col) {
    return data[(channel * kPaddedSize + row) * kPaddedSize + col];
  }
  float at(int channel, int row, int col) const {
    return data[(channel * kPaddedSize + row) * kPaddedSize + col];
  }
};

inline TrainingWindow encode_window(const TileGrid& window) {
  if (window.height() != kLevelHeight || window.width() != kWindowWidth)
    throw ShapeMismatch("encode_window expects a 28x14 grid");
  TrainingWindow out;
  for (int r = 0; r < kPaddedSize; ++r)
    for (int c = 0; c < kPaddedSize; ++c) {
      const bool inside = r < kLevelHeight && c < kWindowWidth;
      const int t = inside ? window.id(r, c) : static_cast<int>(Tile::Empty);
      out.at(t, r, c) = 1.0f;
    }
  return out;
}

/// Crops a generator output to the level region and takes the per-cell
/// argmax over channels. Ties go to the lowest tile identity.
template <typename T>
TileGrid decode_window(std::span<const T> tensor) {
  if (tensor.size() != static_cast<std::size_t>(kWindowValues))
    throw ShapeMismatch("decode_window expects 10x32x32 values, got " + std::to_string(tensor.size()));
  TileGrid grid(kLevelHeight, kWindowWidth);
  constexpr int plane = kPaddedSize * kPaddedSize;
  for (int r = 0; r < kLevelHeight; ++r)
    for (int c = 0; c < kWindowWidth; ++c) {
      int best = 0;
      T best_value = tensor[r * kPaddedSize + c];
      for (int ch = 0; ch < kTileCount; ++ch) {
        const T v = tensor[ch * plane + r * kPaddedSize + c];
        if (!std::isfinite(static_cast<double>(v)))
          throw NonFiniteInput("non-finite generator output at row " + std::to_string(r) + ", col " +
                               std::to_string(c));
        if (v > best_value) {
          best_value = v;
          best = ch;
        }
      }
      grid.set(r, c, static_cast<Tile>(best));
    }
  return grid;
}

inline TileGrid decode_window(const TrainingWindow& w) {
  return decode_window(std::span<const float>(w.data));
}

/// Tile-type histogram normalised to a probability distribution.
inline std::array<double, kTileCount> tile_frequencies(std::span<const TileGrid> grids) {
  std::array<double, kTileCount> freq{};
  double total = 0.0;
  for (const auto& g : grids)
    for (auto v : g.cells()) {
      freq[v] += 1.0;
      total += 1.0;
    }
  if (total > 0.0)
    for (auto& f : freq) f /= total;
  return freq;
}

inline double total_variation(const std::array<double, kTileCount>& p,
                              const std::array<double, kTileCount>& q) {
  double s = 0.0;
  for (int i = 0; i < kTileCount; ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

// Windows dataset export: "LFW1", u32 count, then count tensors of 10*32*32
// little-endian float32 values in channel-major order.
inline constexpr char kWindowsMagic[4] = {'L', 'F', 'W', '1'};

namespace detail {
inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}
inline void put_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}
inline float get_f32(const unsigned char* b) {
  const std::uint32_t bits = get_u32(b);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}
}  // namespace detail

inline void write_windows(std::ostream& out, std::span<const TrainingWindow> windows) {
  out.write(kWindowsMagic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(windows.size()));
  for (const auto& w : windows)
    for (float v : w.data) detail::put_f32(out, v);
}

inline std::vector<TrainingWindow> read_windows(std::istream& in) {
  char magic[4];
  unsigned char count_bytes[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kWindowsMagic, 4) != 0)
    throw FormatVersionMismatch("not an LFW1 windows file");
  if (!in.read(reinterpret_cast<char*>(count_bytes), 4)) throw IoError("truncated windows header");
  const std::uint32_t count = detail::get_u32(count_bytes);
  std::vector<TrainingWindow> windows(count);
  std::vector<unsigned char> buf(kWindowValues * 4);
  for (auto& w : windows) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw IoError("truncated windows payload");
    for (int i = 0; i < kWindowValues; ++i) w.data[i] = detail::get_f32(buf.data() + 4 * i);
  }
  return windows;
}

}  // namespace lve

#endif  // LVE_CORPUS_HPP

#ifndef LVE_RENDER_HPP
#define LVE_RENDER_HPP

#include <png.h>

#include <array>
#include <csetjmp>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "lve/corpus.hpp"

namespace lve::render {

using Rgb = std::array<std::uint8_t, 3>;

struct Palette {
  std::array<Rgb, kTileCount> colors{{
      {{139, 69, 19}},    // X ground
      {{205, 102, 29}},   // S breakable
      {{107, 140, 255}},  // - sky
      {{255, 200, 0}},    // ? full question
      {{160, 120, 60}},   // Q used question
      {{200, 30, 30}},    // E enemy
      {{0, 200, 0}},      // < pipe top left
      {{0, 170, 0}},      // > pipe top right
      {{0, 140, 0}},      // [ pipe left
      {{0, 110, 0}},      // ] pipe right
  }};
  int cell = 16;  // pixels per tile edge
};

inline std::string to_ascii(const TileGrid& grid) { return render_vglc(grid); }

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Rgb pixel(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

inline Image rasterize(const TileGrid& grid, const Palette& palette = {}) {
  Image img;
  img.width = grid.width() * palette.cell;
  img.height = grid.height() * palette.cell;
  img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const Rgb& c = palette.colors[grid.id(y / palette.cell, x / palette.cell)];
      const std::size_t i = (static_cast<std::size_t>(y) * img.width + x) * 3;
      img.rgb[i] = c[0];
      img.rgb[i + 1] = c[1];
      img.rgb[i + 2] = c[2];
    }
  return img;
}

namespace detail {

inline void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

// libpng reports errors by longjmp; nothing with a destructor lives in this frame.
inline bool png_write_rgb(const Image& img, std::string* bytes) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, bytes, png_append, nullptr);
  png_set_compression_level(png, 9);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) png_write_row(png, img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

/// 8-bit RGB PNG at maximum compression; no timestamps, so bytes depend only on pixels.
inline std::string encode_png(const Image& img) {
  std::string bytes;
  if (!detail::png_write_rgb(img, &bytes)) throw IoError("png: encoding failed");
  return bytes;
}

inline void to_image(const TileGrid& grid, const Palette& palette, const std::string& path) {
  const std::string bytes = encode_png(rasterize(grid, palette));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace lve::render

#endif  // LVE_RENDER_HPP

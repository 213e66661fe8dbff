#include "lve/render.hpp"

#include <gtest/gtest.h>
#include <png.h>

#include <filesystem>
#include <random>

#include "test_util.hpp"

namespace lve::render {
namespace {

Image decode_png(const std::string& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  EXPECT_EQ(bytes.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    ADD_FAILURE() << image.message;
    return {};
  }
  image.format = PNG_FORMAT_RGB;
  Image img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.rgb.resize(PNG_IMAGE_SIZE(image));
  EXPECT_TRUE(png_image_finish_read(&image, nullptr, img.rgb.data(), 0, nullptr)) << image.message;
  return img;
}

TEST(ToAscii, MatchesVglcRendering) {
  TileGrid g(1, 2);
  g.set(0, 1, Tile::Solid);
  EXPECT_EQ(to_ascii(g), "-X\n");
  std::mt19937_64 rng(1);
  const TileGrid r = test::random_grid(rng, 14, 28);
  const std::string text = to_ascii(r);
  EXPECT_EQ(parse_vglc(text), r);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 14);
}

TEST(ToImage, DimensionsAndCells) {
  std::mt19937_64 rng(2);
  const TileGrid g = test::random_grid(rng, 14, 28);
  const Palette pal;
  const Image img = decode_png(encode_png(rasterize(g, pal)));
  EXPECT_EQ(img.width, 448);
  EXPECT_EQ(img.height, 224);
  for (int r = 0; r < 14; ++r)
    for (int c = 0; c < 28; ++c) {
      ASSERT_EQ(img.pixel(c * 16, r * 16), pal.colors[g.id(r, c)]);
      ASSERT_EQ(img.pixel(c * 16 + 15, r * 16 + 15), pal.colors[g.id(r, c)]);
    }
}

TEST(ToImage, EmptyGridIsUniform) {
  const Palette pal;
  const Image img = decode_png(encode_png(rasterize(TileGrid(14, 28), pal)));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) ASSERT_EQ(img.pixel(x, y), pal.colors[static_cast<int>(Tile::Empty)]);
}

TEST(ToImage, PaletteColorsAreDistinct) {
  const Palette pal;
  for (int a = 0; a < kTileCount; ++a)
    for (int b = a + 1; b < kTileCount; ++b) EXPECT_NE(pal.colors[a], pal.colors[b]);
}

TEST(ToImage, FilesAreByteIdentical) {
  std::mt19937_64 rng(3);
  const TileGrid g = test::random_grid(rng, 14, 28);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string a = (dir / "lve_render_a.png").string(), b = (dir / "lve_render_b.png").string();
  to_image(g, {}, a);
  to_image(g, {}, b);
  EXPECT_EQ(test::read_file(a), test::read_file(b));
  EXPECT_FALSE(test::read_file(a).empty());
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  EXPECT_THROW(to_image(g, {}, (dir / "no_such_dir" / "x.png").string()), IoError);
}

}  // namespace
}  // namespace lve::render

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "ccodec/common.hpp"

namespace ccodec {

// H x W x C raster of reals in [0,1], row-major, channel-interleaved.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return pixels.size(); }
};

// Binary edge mask, 1 = edge pixel.
struct StructuralMap {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> mask;

  StructuralMap() = default;
  StructuralMap(int h, int w) : height(h), width(w), mask(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return mask[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return mask.size(); }

  bool operator==(const StructuralMap& o) const {
    return height == o.height && width == o.width && mask == o.mask;
  }
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
}  // namespace detail

inline Image load_image(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
    throw FormatError(path + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng failed reading " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": 16-bit PNG not supported");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  int ch = png_get_channels(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * ch);
  Image img(static_cast<int>(h), static_cast<int>(w), ch);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        img.at(static_cast<int>(y), static_cast<int>(x), c) = row[x * ch + c] / 255.0;
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void save_image(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw ArgumentError("save_image supports 1 or 3 channels");
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * img.channels + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Image map_to_image(const StructuralMap& m) {
  Image img(m.height, m.width, 1);
  for (std::size_t i = 0; i < m.size(); ++i) img.pixels[i] = m.mask[i] ? 1.0 : 0.0;
  return img;
}

inline StructuralMap binarize(const Image& img, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ArgumentError("binarize threshold must be in (0,1)");
  if (img.channels != 1) throw ArgumentError("binarize expects a single-channel raster");
  StructuralMap m(img.height, img.width);
  for (std::size_t i = 0; i < img.size(); ++i) m.mask[i] = img.pixels[i] >= threshold ? 1 : 0;
  return m;
}

}  // namespace ccodec

#include <png.h>

#include <cstdio>
#include <memory>

#include "srunit/io/image.hpp"

namespace srunit {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image8 read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng init failed");
  }
  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto depth = png_get_bit_depth(png, info);
  const auto color = png_get_color_type(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  img.data.resize(static_cast<size_t>(img.width * img.height * img.channels));
  rows.resize(static_cast<size_t>(img.height));
  for (Index y = 0; y < img.height; ++y) rows[static_cast<size_t>(y)] = &img.data[static_cast<size_t>(y * img.width * img.channels)];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::string& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3) throw ArgumentError("write_png supports 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng init failed");
  }
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encode failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: identical pixels give identical bytes.
  png_write_info(png, info);
  for (Index y = 0; y < img.height; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(&img.data[static_cast<size_t>(y * img.width * img.channels)]);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 tile_images(const std::vector<Image8>& imgs, Index columns, Index gap, std::uint8_t gap_value) {
  if (imgs.empty() || columns < 1) throw ArgumentError("tile_images: nothing to tile");
  const Index w = imgs[0].width, h = imgs[0].height, c = imgs[0].channels;
  const Index n = static_cast<Index>(imgs.size());
  const Index cols = std::min(columns, n), rows = (n + cols - 1) / cols;
  Image8 out(cols * w + (cols - 1) * gap, rows * h + (rows - 1) * gap, c, gap_value);
  for (Index i = 0; i < n; ++i) {
    const Image8& im = imgs[static_cast<size_t>(i)];
    if (im.width != w || im.height != h || im.channels != c) throw DimensionError("tile_images: mixed sizes");
    const Index ox = (i % cols) * (w + gap), oy = (i / cols) * (h + gap);
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x)
        for (Index ch = 0; ch < c; ++ch) out.at(oy + y, ox + x, ch) = im.at(y, x, ch);
  }
  return out;
}

}  // namespace srunit

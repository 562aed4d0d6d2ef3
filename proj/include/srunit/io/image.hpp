#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "srunit/core/tensor.hpp"

namespace srunit {

/// 8-bit interleaved (HWC) image. Masks are single-channel images of class ids.
struct Image8 {
  Index width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> data;

  Image8() = default;
  Image8(Index w, Index h, Index c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w * h * c), fill) {}

  std::uint8_t& at(Index y, Index x, Index c = 0) { return data[static_cast<size_t>((y * width + x) * channels + c)]; }
  std::uint8_t at(Index y, Index x, Index c = 0) const {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }
  Index pixels() const { return width * height; }
  bool operator==(const Image8&) const = default;
};

/// [0,255] -> [-1,1], one image as batch entry `n` of an N x C x H x W tensor.
template <typename Scalar>
void write_to_tensor(const Image8& img, Tensor<Scalar>& t, Index n) {
  if (t.c() != img.channels || t.h() != img.height || t.w() != img.width)
    throw DimensionError("image " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                         " does not fit tensor " + t.shape().str());
  for (Index c = 0; c < img.channels; ++c)
    for (Index y = 0; y < img.height; ++y)
      for (Index x = 0; x < img.width; ++x)
        t.at(n, c, y, x) = static_cast<Scalar>(img.at(y, x, c) / 127.5 - 1.0);
}

template <typename Scalar>
Tensor<Scalar> to_tensor(const std::vector<Image8>& imgs) {
  if (imgs.empty()) throw ArgumentError("to_tensor: empty image list");
  Tensor<Scalar> t(Shape{static_cast<Index>(imgs.size()), imgs[0].channels, imgs[0].height, imgs[0].width});
  for (size_t i = 0; i < imgs.size(); ++i) write_to_tensor(imgs[i], t, static_cast<Index>(i));
  return t;
}

/// [-1,1] -> [0,255], clamped and rounded to nearest.
template <typename Scalar>
Image8 from_tensor(const Tensor<Scalar>& t, Index n) {
  t.require_rank(4);
  Image8 img(t.w(), t.h(), t.c());
  for (Index c = 0; c < t.c(); ++c)
    for (Index y = 0; y < t.h(); ++y)
      for (Index x = 0; x < t.w(); ++x) {
        double v = (static_cast<double>(t.at(n, c, y, x)) + 1.0) * 127.5;
        v = v < 0 ? 0 : (v > 255 ? 255 : v);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
      }
  return img;
}

Image8 read_png(const std::string& path);
void write_png(const std::string& path, const Image8& img);

/// Tiles equally sized images left to right, top to bottom.
Image8 tile_images(const std::vector<Image8>& imgs, Index columns, Index gap = 2, std::uint8_t gap_value = 255);

}  // namespace srunit

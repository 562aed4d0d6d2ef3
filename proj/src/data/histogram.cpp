#include "srunit/data/histogram.hpp"

#include <cmath>

namespace srunit {

HistogramVector class_histogram(const Image8& mask, Index num_ids, int ignore_id) {
  if (mask.channels != 1) throw DimensionError("class_histogram expects a single-channel mask");
  if (num_ids < 1) throw ArgumentError("class_histogram needs num_ids >= 1");
  HistogramVector h;
  h.values = Eigen::VectorXd::Zero(num_ids);
  Index labeled = 0;
  for (auto v : mask.data) {
    if (static_cast<int>(v) == ignore_id) continue;
    if (v >= num_ids) throw IndexError("mask label " + std::to_string(v) + " >= " + std::to_string(num_ids));
    h.values[v] += 1;
    ++labeled;
  }
  if (labeled == 0) throw ArgumentError("class_histogram: mask has no labeled pixels");
  h.values /= static_cast<double>(labeled);
  return h;
}

std::uint8_t gray_level(const Image8& img, Index y, Index x) {
  if (img.channels == 1) return img.at(y, x);
  const double v = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  return static_cast<std::uint8_t>(std::lround(std::min(255.0, v)));
}

HistogramVector gray_histogram(const Image8& img, Index bucket, bool normalize, Index buckets) {
  if (bucket < 1 || buckets < 1) throw ArgumentError("gray_histogram: bucket width and count must be >= 1");
  if (img.channels != 1 && img.channels != 3) throw DimensionError("gray_histogram expects 1 or 3 channels");
  HistogramVector h;
  h.normalized = normalize;
  h.values = Eigen::VectorXd::Zero(buckets);
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x) h.values[std::min<Index>(gray_level(img, y, x) / bucket, buckets - 1)] += 1;
  if (normalize && img.pixels() > 0) h.values /= static_cast<double>(img.pixels());
  return h;
}

}  // namespace srunit

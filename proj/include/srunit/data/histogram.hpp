#pragma once

#include <Eigen/Dense>

#include "srunit/io/image.hpp"

namespace srunit {

inline constexpr Index kGrayBucketWidth = 5;
inline constexpr Index kGrayBuckets = 51;

struct HistogramVector {
  Eigen::VectorXd values;
  std::string source_id;
  bool normalized = true;
};

/// Fractions of labeled pixels per id 0..num_ids-1; pixels equal to `ignore_id`
/// are skipped. Throws if a label is >= num_ids or no pixel is labeled.
HistogramVector class_histogram(const Image8& mask, Index num_ids, int ignore_id = 255);

/// 8-bit gray level: the channel itself, or round(0.299 R + 0.587 G + 0.114 B).
std::uint8_t gray_level(const Image8& img, Index y, Index x);

/// Buckets of width `bucket` with the top bucket absorbing the remainder
/// (51 buckets for width 5, the last covering 250..255).
HistogramVector gray_histogram(const Image8& img, Index bucket = kGrayBucketWidth, bool normalize = true,
                               Index buckets = kGrayBuckets);

}  // namespace srunit

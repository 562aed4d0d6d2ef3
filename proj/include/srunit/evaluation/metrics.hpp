#pragma once

#include <Eigen/Dense>
#include <vector>

#include "srunit/data/synthetic.hpp"

namespace srunit {

/// Rows are ground truth, columns predictions. Pixels whose truth equals the
/// ignore id are skipped.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;
  int ignore_id = kIgnoreId;
  std::int64_t ignored = 0;

  explicit ConfusionMatrix(Index classes = 0, int ignore = kIgnoreId);

  Index classes() const { return counts.rows(); }
  std::int64_t total() const { return counts.sum(); }
  void add(const Image8& truth, const Image8& pred);
  void merge(const ConfusionMatrix& other);
};

struct SegmentationScores {
  double pixel_accuracy = 0;
  double class_accuracy = 0;
  double mean_iou = 0;
};

/// Throws MetricError on an empty matrix.
SegmentationScores segmentation_metrics(const ConfusionMatrix& cm);

/// Fraction of pixels whose max-channel absolute difference is strictly below
/// delta, pooled over all pixels (or averaged per image).
double acc_delta(const std::vector<Image8>& pred, const std::vector<Image8>& truth, double delta,
                 bool per_image = false);
double acc_delta(const Image8& pred, const Image8& truth, double delta);

/// Mean over pixels of the Euclidean RGB difference on the 8-bit scale.
double dist_l2(const std::vector<Image8>& pred, const std::vector<Image8>& truth);
double dist_l2(const Image8& pred, const Image8& truth);

/// Nearest rendered palette color (background included) under max-channel
/// distance; ties go to the lower id.
Image8 classify_palette(const Image8& img, const SyntheticDomainSpec& spec);

struct FlipStats {
  std::int64_t flipped = 0;
  std::int64_t foreground = 0;
  double rate() const;
};

FlipStats flip_stats(const std::vector<Image8>& translated, const std::vector<Image8>& truth_masks,
                     const SyntheticDomainSpec& target);
/// Throws MetricError when there is no foreground pixel.
double flip_rate(const std::vector<Image8>& translated, const std::vector<Image8>& truth_masks,
                 const SyntheticDomainSpec& target);

}  // namespace srunit

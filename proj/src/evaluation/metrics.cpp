#include "srunit/evaluation/metrics.hpp"

#include <cmath>

namespace srunit {

namespace {

void require_same_image_shape(const Image8& a, const Image8& b, const char* what) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw DimensionError(std::string(what) + ": image sizes differ");
}

void require_pairs(size_t a, size_t b, const char* what) {
  if (a != b) throw DimensionError(std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b) + " images");
  if (a == 0) throw MetricError(std::string(what) + ": no images");
}

int max_abs_diff(const Image8& a, const Image8& b, Index y, Index x) {
  int d = 0;
  for (Index c = 0; c < a.channels; ++c) d = std::max(d, std::abs(int(a.at(y, x, c)) - int(b.at(y, x, c))));
  return d;
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(Index classes, int ignore)
    : counts(decltype(counts)::Zero(classes, classes)), ignore_id(ignore) {}

void ConfusionMatrix::add(const Image8& truth, const Image8& pred) {
  require_same_image_shape(truth, pred, "confusion matrix");
  if (truth.channels != 1) throw DimensionError("confusion matrix expects label maps");
  for (size_t i = 0; i < truth.data.size(); ++i) {
    const int t = truth.data[i], p = pred.data[i];
    if (t == ignore_id) {
      ++ignored;
      continue;
    }
    if (t >= classes() || p >= classes())
      throw IndexError("label " + std::to_string(std::max(t, p)) + " outside " + std::to_string(classes()) + " classes");
    ++counts(t, p);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes() != classes()) throw DimensionError("cannot merge confusion matrices of different size");
  counts += other.counts;
  ignored += other.ignored;
}

SegmentationScores segmentation_metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw MetricError("segmentation metrics of an empty confusion matrix");
  SegmentationScores s;
  s.pixel_accuracy = static_cast<double>(cm.counts.trace()) / static_cast<double>(total);
  double recall = 0, iou = 0;
  Index n_recall = 0, n_iou = 0;
  for (Index c = 0; c < cm.classes(); ++c) {
    const auto tp = cm.counts(c, c);
    const auto gt = cm.counts.row(c).sum();
    const auto pr = cm.counts.col(c).sum();
    if (gt > 0) {
      recall += static_cast<double>(tp) / static_cast<double>(gt);
      ++n_recall;
    }
    const auto uni = gt + pr - tp;
    if (uni > 0) {
      iou += static_cast<double>(tp) / static_cast<double>(uni);
      ++n_iou;
    }
  }
  s.class_accuracy = recall / static_cast<double>(n_recall);
  s.mean_iou = iou / static_cast<double>(n_iou);
  return s;
}

double acc_delta(const Image8& pred, const Image8& truth, double delta) {
  return acc_delta(std::vector<Image8>{pred}, std::vector<Image8>{truth}, delta);
}

double acc_delta(const std::vector<Image8>& pred, const std::vector<Image8>& truth, double delta, bool per_image) {
  require_pairs(pred.size(), truth.size(), "acc_delta");
  std::int64_t hit = 0, total = 0;
  double per_image_sum = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    require_same_image_shape(pred[i], truth[i], "acc_delta");
    std::int64_t h = 0;
    for (Index y = 0; y < pred[i].height; ++y)
      for (Index x = 0; x < pred[i].width; ++x)
        if (max_abs_diff(pred[i], truth[i], y, x) < delta) ++h;
    hit += h;
    total += pred[i].pixels();
    if (pred[i].pixels() > 0) per_image_sum += static_cast<double>(h) / static_cast<double>(pred[i].pixels());
  }
  if (total == 0) throw MetricError("acc_delta: no pixels");
  return per_image ? per_image_sum / static_cast<double>(pred.size())
                   : static_cast<double>(hit) / static_cast<double>(total);
}

double dist_l2(const Image8& pred, const Image8& truth) {
  return dist_l2(std::vector<Image8>{pred}, std::vector<Image8>{truth});
}

double dist_l2(const std::vector<Image8>& pred, const std::vector<Image8>& truth) {
  require_pairs(pred.size(), truth.size(), "dist_l2");
  double sum = 0;
  std::int64_t total = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    require_same_image_shape(pred[i], truth[i], "dist_l2");
    for (Index y = 0; y < pred[i].height; ++y)
      for (Index x = 0; x < pred[i].width; ++x) {
        double s = 0;
        for (Index c = 0; c < pred[i].channels; ++c) {
          const double d = double(pred[i].at(y, x, c)) - double(truth[i].at(y, x, c));
          s += d * d;
        }
        sum += std::sqrt(s);
      }
    total += pred[i].pixels();
  }
  if (total == 0) throw MetricError("dist_l2: no pixels");
  return sum / static_cast<double>(total);
}

Image8 classify_palette(const Image8& img, const SyntheticDomainSpec& spec) {
  if (img.channels != 3) throw DimensionError("classify_palette expects RGB images");
  const auto pal = spec.rendered_palette();
  Image8 out(img.width, img.height, 1);
  for (Index y = 0; y < img.height; ++y)
    for (Index x = 0; x < img.width; ++x) {
      const Rgb px{img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
      int best = 0, best_d = max_channel_distance(px, pal[0]);
      for (size_t k = 1; k < pal.size(); ++k) {
        const int d = max_channel_distance(px, pal[k]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int>(k);
        }
      }
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

double FlipStats::rate() const {
  if (foreground == 0) throw MetricError("flip rate undefined without foreground pixels");
  return static_cast<double>(flipped) / static_cast<double>(foreground);
}

FlipStats flip_stats(const std::vector<Image8>& translated, const std::vector<Image8>& truth_masks,
                     const SyntheticDomainSpec& target) {
  require_pairs(translated.size(), truth_masks.size(), "flip_rate");
  FlipStats s;
  for (size_t i = 0; i < translated.size(); ++i) {
    const Image8 pred = classify_palette(translated[i], target);
    if (pred.width != truth_masks[i].width || pred.height != truth_masks[i].height)
      throw DimensionError("flip_rate: mask size differs from image");
    for (size_t p = 0; p < pred.data.size(); ++p) {
      const auto t = truth_masks[i].data[p];
      if (t == kBackgroundId || t == kIgnoreId) continue;
      ++s.foreground;
      if (pred.data[p] != t) ++s.flipped;
    }
  }
  return s;
}

double flip_rate(const std::vector<Image8>& translated, const std::vector<Image8>& truth_masks,
                 const SyntheticDomainSpec& target) {
  return flip_stats(translated, truth_masks, target).rate();
}

}  // namespace srunit

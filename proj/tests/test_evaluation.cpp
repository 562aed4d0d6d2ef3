#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "srunit/data/dataset.hpp"
#include "srunit/evaluation/metrics.hpp"
#include "srunit/evaluation/plot.hpp"
#include "srunit/evaluation/report.hpp"

using namespace srunit;
namespace fs = std::filesystem;

namespace {

ConfusionMatrix matrix(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  ConfusionMatrix cm(static_cast<Index>(rows.size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (auto v : row) cm.counts(r, c++) = v;
    ++r;
  }
  return cm;
}

Image8 random_image(Rng& rng, Index w, Index h, Index c = 3) {
  Image8 img(w, h, c);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

SyntheticDomainSpec three_class_spec() {
  SyntheticDomainSpec s;
  s.class_palette = default_palette(3, 1);
  s.class_histogram = {0.2, 0.2, 0.2};
  s.shape_family = {ShapeFamily::Disc, ShapeFamily::Square, ShapeFamily::Triangle};
  s.image_size = 16;
  return s;
}

int brute_nearest(const std::vector<Rgb>& pal, const Image8& img, Index y, Index x) {
  int best = 0, best_d = 1 << 30;
  for (size_t k = 0; k < pal.size(); ++k) {
    int d = 0;
    for (Index c = 0; c < 3; ++c) d = std::max(d, std::abs(int(img.at(y, x, c)) - pal[k][static_cast<size_t>(c)]));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("srunit_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

// --- segmentation -----------------------------------------------------------------

TEST(Segmentation, PerfectAndAllWrong) {
  auto s = segmentation_metrics(matrix({{4, 0, 0}, {0, 2, 0}, {0, 0, 7}}));
  EXPECT_DOUBLE_EQ(s.pixel_accuracy, 1);
  EXPECT_DOUBLE_EQ(s.class_accuracy, 1);
  EXPECT_DOUBLE_EQ(s.mean_iou, 1);
  s = segmentation_metrics(matrix({{0, 3}, {5, 0}}));
  EXPECT_DOUBLE_EQ(s.pixel_accuracy, 0);
  EXPECT_DOUBLE_EQ(s.class_accuracy, 0);
  EXPECT_DOUBLE_EQ(s.mean_iou, 0);
}

TEST(Segmentation, TwoClassHandComputed) {
  const auto s = segmentation_metrics(matrix({{3, 1}, {2, 2}}));
  EXPECT_DOUBLE_EQ(s.pixel_accuracy, 5.0 / 8);
  EXPECT_DOUBLE_EQ(s.class_accuracy, 0.625);
  EXPECT_DOUBLE_EQ(s.mean_iou, 0.45);
}

TEST(Segmentation, AbsentClassesExcluded) {
  // Class 2 never in truth but predicted once: recall undefined, IoU 0.
  // Class 3 absent from both: excluded from mIoU too.
  const auto s = segmentation_metrics(matrix({{2, 0, 0, 0}, {0, 1, 1, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}));
  EXPECT_DOUBLE_EQ(s.class_accuracy, (1.0 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(s.mean_iou, (1.0 + 0.5 + 0.0) / 3);
  EXPECT_THROW(segmentation_metrics(ConfusionMatrix(3)), MetricError);
  EXPECT_THROW(segmentation_metrics(ConfusionMatrix(0)), MetricError);
}

TEST(Segmentation, ConfusionFromMapsIgnoresExactlyIgnoreId) {
  Image8 truth(4, 1, 1), pred(4, 1, 1);
  truth.data = {0, 1, 255, 1};
  pred.data = {0, 0, 1, 1};
  ConfusionMatrix cm(2);
  cm.add(truth, pred);
  EXPECT_EQ(cm.total(), 3);
  EXPECT_EQ(cm.ignored, 1);
  EXPECT_EQ(cm.counts(1, 0), 1);
  EXPECT_EQ(cm.counts(1, 1), 1);
  ConfusionMatrix other(2);
  other.add(truth, truth);
  cm.merge(other);
  EXPECT_EQ(cm.total(), 6);
  EXPECT_EQ(cm.ignored, 2);
  truth.data[0] = 5;
  EXPECT_THROW(cm.add(truth, pred), Error);
}

TEST(Segmentation, NotSymmetric) {
  const auto a = segmentation_metrics(matrix({{3, 1}, {2, 2}}));
  const auto b = segmentation_metrics(matrix({{3, 2}, {1, 2}}));
  EXPECT_NE(a.class_accuracy, b.class_accuracy);
}

// --- pixel metrics ----------------------------------------------------------------

TEST(PixelMetrics, AccDeltaStrictThreshold) {
  Rng rng(1);
  const auto a = random_image(rng, 5, 5);
  for (double d : {0.5, 3.0, 30.0}) EXPECT_DOUBLE_EQ(acc_delta(a, a, d), 1.0);
  Image8 x(1, 1, 3), y(1, 1, 3);
  x.data = {100, 50, 50};
  y.data = {70, 50, 50};
  EXPECT_DOUBLE_EQ(acc_delta(x, y, 30), 0.0);
  EXPECT_DOUBLE_EQ(acc_delta(x, y, 31), 1.0);
}

TEST(PixelMetrics, AccDeltaMatchesLoopAndIsMonotone) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_image(rng, 4, 4), q = random_image(rng, 4, 4);
    for (double d : {3.0, 30.0, 50.0, 128.0}) {
      int hits = 0;
      for (Index yy = 0; yy < 4; ++yy)
        for (Index xx = 0; xx < 4; ++xx) {
          int m = 0;
          for (Index c = 0; c < 3; ++c) m = std::max(m, std::abs(int(p.at(yy, xx, c)) - int(q.at(yy, xx, c))));
          hits += m < d;
        }
      EXPECT_DOUBLE_EQ(acc_delta(p, q, d), hits / 16.0);
      EXPECT_DOUBLE_EQ(acc_delta(p, q, d), acc_delta(q, p, d));
    }
    double prev = 0;
    for (double d = 0; d <= 256; d += 8) {
      const double v = acc_delta(p, q, d);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(PixelMetrics, AccDeltaPooledVersusPerImage) {
  Image8 a(2, 1, 3, 0), b(2, 1, 3, 0), c(4, 1, 3, 0), d(4, 1, 3, 0);
  b.data[0] = 100;  // one of two pixels off
  // c/d all equal: 1.0
  const double pooled = acc_delta({b, d}, {a, c}, 30);
  const double per_image = acc_delta({b, d}, {a, c}, 30, true);
  EXPECT_DOUBLE_EQ(pooled, 5.0 / 6);
  EXPECT_DOUBLE_EQ(per_image, (0.5 + 1.0) / 2);
}

TEST(PixelMetrics, Dist) {
  Rng rng(3);
  const auto a = random_image(rng, 6, 3);
  EXPECT_DOUBLE_EQ(dist_l2(a, a), 0.0);
  Image8 x(3, 2, 3, 10), y(3, 2, 3, 10);
  for (Index i = 0; i < 6; ++i) {
    y.data[static_cast<size_t>(3 * i)] = 13;
    y.data[static_cast<size_t>(3 * i + 1)] = 14;
  }
  EXPECT_DOUBLE_EQ(dist_l2(x, y), 5.0);
  for (int t = 0; t < 10; ++t) {
    const auto p = random_image(rng, 5, 4), q = random_image(rng, 5, 4);
    double s = 0;
    for (Index yy = 0; yy < 4; ++yy)
      for (Index xx = 0; xx < 5; ++xx) {
        double e = 0;
        for (Index c = 0; c < 3; ++c) e += std::pow(double(p.at(yy, xx, c)) - double(q.at(yy, xx, c)), 2);
        s += std::sqrt(e);
      }
    EXPECT_NEAR(dist_l2(p, q), s / 20, 1e-9);
    EXPECT_DOUBLE_EQ(dist_l2(p, q), dist_l2(q, p));
  }
  EXPECT_THROW(dist_l2(random_image(rng, 2, 2), random_image(rng, 3, 2)), Error);
}

// --- flip rate --------------------------------------------------------------------

TEST(FlipRate, CorrectRenderingGivesZero) {
  const auto spec = three_class_spec();
  Rng rng(4);
  const auto samples = synthesize_domain(spec, 5, rng);
  std::vector<Image8> imgs, masks;
  for (const auto& s : samples) {
    imgs.push_back(render_mask(s.mask, spec));
    masks.push_back(s.mask);
  }
  EXPECT_DOUBLE_EQ(flip_rate(imgs, masks, spec), 0.0);
}

TEST(FlipRate, SwappedPaletteGivesOne) {
  auto spec = three_class_spec();
  spec.class_histogram = {0.3, 0.3, 0.0};
  Rng rng(5);
  auto swapped = spec;
  std::swap(swapped.class_palette[0], swapped.class_palette[1]);
  std::vector<Image8> imgs, masks;
  for (const auto& s : synthesize_domain(spec, 5, rng)) {
    imgs.push_back(render_mask(s.mask, swapped));
    masks.push_back(s.mask);
  }
  EXPECT_DOUBLE_EQ(flip_rate(imgs, masks, spec), 1.0);
}

TEST(FlipRate, NoiseMatchesNearestColorOracle) {
  const auto spec = three_class_spec();
  const auto pal = spec.rendered_palette();
  Rng rng(6);
  std::vector<Image8> imgs, masks;
  for (const auto& s : synthesize_domain(spec, 6, rng)) {
    imgs.push_back(random_image(rng, 16, 16));
    masks.push_back(s.mask);
  }
  std::int64_t fg = 0, flipped = 0;
  for (size_t i = 0; i < imgs.size(); ++i)
    for (Index y = 0; y < 16; ++y)
      for (Index x = 0; x < 16; ++x) {
        const int t = masks[i].at(y, x);
        if (t == 0) continue;
        ++fg;
        flipped += brute_nearest(pal, imgs[i], y, x) != t;
      }
  const auto st = flip_stats(imgs, masks, spec);
  EXPECT_EQ(st.foreground, fg);
  EXPECT_EQ(st.flipped, flipped);
  EXPECT_DOUBLE_EQ(flip_rate(imgs, masks, spec), static_cast<double>(flipped) / static_cast<double>(fg));
  const auto cls = classify_palette(imgs[0], spec);
  for (Index y = 0; y < 16; ++y)
    for (Index x = 0; x < 16; ++x) EXPECT_EQ(cls.at(y, x), brute_nearest(pal, imgs[0], y, x));
}

TEST(FlipRate, BackgroundAndIgnoreExcluded) {
  const auto spec = three_class_spec();
  Image8 mask(2, 2, 1);
  mask.data = {0, 255, 1, 0};
  const Image8 img = render_mask(mask, spec);
  // Wrong color on background and ignored pixels only.
  Image8 noisy = img;
  for (Index c = 0; c < 3; ++c) {
    noisy.at(0, 0, c) = static_cast<std::uint8_t>(spec.rendered_palette()[2][static_cast<size_t>(c)]);
    noisy.at(0, 1, c) = static_cast<std::uint8_t>(spec.rendered_palette()[3][static_cast<size_t>(c)]);
  }
  const auto st = flip_stats({noisy}, {mask}, spec);
  EXPECT_EQ(st.foreground, 1);
  EXPECT_EQ(st.flipped, 0);
  Image8 empty(2, 2, 1, 0);
  EXPECT_THROW(flip_rate({img}, {empty}, spec), MetricError);
}

// --- runs -------------------------------------------------------------------------

namespace {

// Same-palette domains on disk, some mask pixels marked ignored.
fs::path write_eval_set(const std::string& name, Index ignored_per_mask) {
  const auto root = temp_dir(name);
  auto spec = three_class_spec();
  Rng rng(7);
  auto samples = synthesize_domain(spec, 4, rng);
  for (auto& s : samples)
    for (Index i = 0; i < ignored_per_mask; ++i) s.mask.data[static_cast<size_t>(i * 3)] = kIgnoreId;
  write_domain(root, "domainA", samples);
  write_domain(root, "domainB", samples);
  nlohmann::json m;
  m["domains"]["domainA"]["spec"] = spec_to_json(spec);
  m["domains"]["domainB"]["spec"] = spec_to_json(spec);
  write_json(root / "manifest.json", m);
  return root;
}

}  // namespace

TEST(EvaluateRun, IdentityGeneratorOnSamePalette) {
  // Ignored pixels are rendered as background in the truth image, which the
  // identity translation then reproduces.
  const auto root = write_eval_set("identity", 0);
  TrainConfig cfg;
  cfg.gen_arch = "identity";
  cfg.head_hidden = cfg.head_dim = 4;
  cfg.ndf = 2;
  const auto state = make_state(cfg);
  const auto r = evaluate_state(state, root, EvalOptions{});
  EXPECT_DOUBLE_EQ(r.metrics.at("flip_rate"), 0.0);
  EXPECT_DOUBLE_EQ(r.metrics.at("Dist"), 0.0);
  EXPECT_DOUBLE_EQ(r.metrics.at("pxAcc"), 1.0);
  EXPECT_DOUBLE_EQ(r.metrics.at("mIoU"), 1.0);
  EXPECT_DOUBLE_EQ(r.metrics.at("acc_30"), 1.0);
  EXPECT_DOUBLE_EQ(r.metrics.at("acc_50"), 1.0);
}

TEST(EvaluateRun, CountsMatchDatasetAndRunsAreDeterministic) {
  const auto root = write_eval_set("counts", 5);
  auto cfg = TrainConfig{};
  cfg.ngf = 2;
  cfg.n_blocks = 1;
  cfg.head_hidden = cfg.head_dim = 4;
  cfg.ndf = 2;
  cfg.seed = 3;
  const auto state = make_state(cfg);
  const auto dir = temp_dir("counts_ckpt");
  save_checkpoint(state, dir / "c.ckpt");
  EvalOptions opt;
  opt.deltas = {3, 30};
  const auto r1 = evaluate_run(dir / "c.ckpt", root, opt), r2 = evaluate_run(dir / "c.ckpt", root, opt);
  EXPECT_EQ(r1.to_json().dump(), r2.to_json().dump());

  const auto data = load_domain(root, "domainA");
  std::int64_t px = 0, ignored = 0, fg = 0;
  for (const auto& m : data.masks)
    for (auto v : m.data) {
      ++px;
      ignored += v == kIgnoreId;
      fg += v != kIgnoreId && v != kBackgroundId;
    }
  EXPECT_EQ(ignored, 4 * 5);
  EXPECT_EQ(r1.counts.at("pixels"), px);
  EXPECT_EQ(r1.counts.at("ignored_pixels"), ignored);
  EXPECT_EQ(r1.counts.at("confusion_total"), px - ignored);
  EXPECT_EQ(r1.counts.at("labeled_pixels"), px - ignored);
  EXPECT_EQ(r1.counts.at("foreground_pixels"), fg);
  EXPECT_TRUE(r1.metrics.count("acc_3"));
  EXPECT_LE(r1.metrics.at("acc_3"), r1.metrics.at("acc_30"));
  for (const char* k : {"pxAcc", "clsAcc", "mIoU", "acc_3", "acc_30", "flip_rate"}) {
    EXPECT_GE(r1.metrics.at(k), 0.0) << k;
    EXPECT_LE(r1.metrics.at(k), 1.0) << k;
  }
  EXPECT_GE(r1.metrics.at("Dist"), 0.0);

  const auto j = r1.to_json();
  for (const char* k : {"metrics", "counts", "config", "versions"}) EXPECT_TRUE(j.contains(k)) << k;
  emit_report(r1, dir / "report.json", true);
  EXPECT_EQ(read_json(dir / "report.json").dump(), j.dump());
  bool png = false;
  for (const auto& e : fs::directory_iterator(dir)) png |= e.path().extension() == ".png";
  EXPECT_TRUE(png);
}

TEST(EvaluateRun, MissingPiecesAreReported) {
  const auto root = write_eval_set("missing", 0);
  fs::remove(root / "manifest.json");
  TrainConfig cfg;
  cfg.gen_arch = "identity";
  cfg.head_hidden = cfg.head_dim = 4;
  const auto state = make_state(cfg);
  EXPECT_THROW(evaluate_state(state, root, EvalOptions{}), IoError);
  fs::remove_all(root / "domainA" / "masks");
  EXPECT_THROW(evaluate_state(state, root, EvalOptions{}), IoError);
  EXPECT_THROW(evaluate_run(root / "none.ckpt", root, EvalOptions{}), Error);
}

// --- plots ------------------------------------------------------------------------

TEST(Plots, CanvasesAndCsvSeries) {
  const auto dir = temp_dir("plots");
  {
    std::ofstream f(dir / "l.csv");
    f << "epoch,iteration,gan_d,nce\n0,0,1.5,2\n0,1,1.25,1.5\n1,2,1,nan\n";
  }
  const auto series = read_csv_series((dir / "l.csv").string(), {"epoch", "iteration"});
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].name, "gan_d");
  EXPECT_EQ(series[0].y, (std::vector<double>{1.5, 1.25, 1}));
  const auto img = line_plot(series, 320, 200);
  EXPECT_EQ(img.width, 320);
  EXPECT_EQ(img.height, 200);
  EXPECT_EQ(img.channels, 3);
  bool inked = false;
  for (auto v : img.data) inked |= v != 255;
  EXPECT_TRUE(inked);
  const auto bars = bar_plot({{"pxAcc", 0.5}, {"mIoU", 0.25}});
  EXPECT_EQ(bars.width, 640);
}

#include "srunit/evaluation/report.hpp"

#include <Eigen/Core>
#include <png.h>

#include <sstream>

#include "srunit/evaluation/plot.hpp"

namespace srunit {

namespace {

std::string delta_key(double d) {
  std::ostringstream os;
  os << "acc_" << d;
  return os.str();
}

}  // namespace

nlohmann::json version_info() {
  return {{"srunit", "0.1.0"},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"checkpoint_format", 1}};
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["metrics"] = metrics;
  j["counts"] = counts;
  j["config"] = config;
  j["versions"] = versions;
  return j;
}

MetricsReport evaluate_state(const TrainState& state, const std::filesystem::path& data_root, const EvalOptions& opt) {
  const DomainData src = load_domain(data_root, opt.source_domain, opt.max_images);
  if (!src.has_masks()) throw IoError("evaluation needs masks for " + opt.source_domain);
  const auto target = manifest_spec(data_root, opt.target_domain);
  if (!target) throw IoError("manifest.json has no spec for " + opt.target_domain);
  if (src.images.empty()) throw MetricError("no evaluation images");

  const Index C = target->num_classes();
  std::vector<Image8> translated, truth;
  ConfusionMatrix cm(C + 1);
  std::int64_t ignored_px = 0, labeled_px = 0;
  for (size_t i = 0; i < src.images.size(); ++i) {
    const Image8& im = src.images[i];
    const Image8& mask = src.masks[i];
    if (state.cfg.gen_arch == "resnet" && (im.width % 4 || im.height % 4))
      throw DimensionError("image " + src.files[i] + " size must be divisible by 4 for this generator");
    const Image8 out = from_tensor(translate(state, to_tensor<Real>({im})), 0);
    translated.push_back(out);
    truth.push_back(render_mask(mask, *target));
    cm.add(mask, classify_palette(out, *target));
    for (auto v : mask.data) (v == kIgnoreId ? ignored_px : labeled_px)++;
  }

  MetricsReport r;
  const auto seg = segmentation_metrics(cm);
  r.metrics["pxAcc"] = seg.pixel_accuracy;
  r.metrics["clsAcc"] = seg.class_accuracy;
  r.metrics["mIoU"] = seg.mean_iou;
  r.metrics["Dist"] = dist_l2(translated, truth);
  for (double d : opt.deltas) r.metrics[delta_key(d)] = acc_delta(translated, truth, d, opt.per_image_acc);
  const FlipStats fs = flip_stats(translated, src.masks, *target);
  if (fs.foreground > 0) r.metrics["flip_rate"] = fs.rate();

  std::int64_t pixels = 0;
  for (const auto& im : src.images) pixels += im.pixels();
  r.counts["images"] = static_cast<std::int64_t>(src.images.size());
  r.counts["pixels"] = pixels;
  r.counts["ignored_pixels"] = ignored_px;
  r.counts["labeled_pixels"] = labeled_px;
  r.counts["confusion_total"] = cm.total();
  r.counts["foreground_pixels"] = fs.foreground;
  r.counts["flipped_pixels"] = fs.flipped;

  r.config["train"] = state.cfg.to_key_values();
  r.config["eval"] = {{"deltas", opt.deltas},
                      {"per_image_acc", opt.per_image_acc},
                      {"source_domain", opt.source_domain},
                      {"target_domain", opt.target_domain},
                      {"max_images", opt.max_images},
                      {"data_root", data_root.string()}};
  r.config["epoch"] = state.epoch;
  r.config["iteration"] = state.iteration;
  r.versions = version_info();
  return r;
}

MetricsReport evaluate_run(const std::filesystem::path& checkpoint, const std::filesystem::path& data_root,
                           const EvalOptions& opt) {
  const TrainState state = load_checkpoint(checkpoint);
  MetricsReport r = evaluate_state(state, data_root, opt);
  r.config["checkpoint"] = checkpoint.string();
  return r;
}

void emit_report(const MetricsReport& report, const std::filesystem::path& path, bool plots) {
  write_json(path, report.to_json());
  if (!plots) return;
  std::vector<std::pair<std::string, double>> bars;
  for (const auto& [k, v] : report.metrics)
    if (k != "Dist") bars.emplace_back(k, v);
  auto stem = path;
  stem.replace_extension();
  write_png(stem.string() + "_metrics.png", bar_plot(bars));
}

}  // namespace srunit

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "srunit/evaluation/metrics.hpp"
#include "srunit/training/trainer.hpp"

namespace srunit {

struct EvalOptions {
  std::vector<double> deltas{30, 50};
  bool per_image_acc = false;
  std::string source_domain = "domainA";
  std::string target_domain = "domainB";
  Index max_images = -1;
};

struct MetricsReport {
  std::map<std::string, double> metrics;
  std::map<std::string, std::int64_t> counts;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json versions = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Translates every source-domain image and scores it against the target-domain
/// rendering of its mask: Dist, Acc(delta), flip_rate, and pxAcc/clsAcc/mIoU of
/// the palette segmentation of the translation.
MetricsReport evaluate_state(const TrainState& state, const std::filesystem::path& data_root, const EvalOptions& opt);
MetricsReport evaluate_run(const std::filesystem::path& checkpoint, const std::filesystem::path& data_root,
                           const EvalOptions& opt);

/// Writes report JSON; with `plots` also metric bars next to it.
void emit_report(const MetricsReport& report, const std::filesystem::path& path, bool plots = false);

nlohmann::json version_info();

}  // namespace srunit

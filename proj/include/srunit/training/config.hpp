#pragma once

#include <map>
#include <string>
#include <vector>

#include "srunit/core/tensor.hpp"

namespace srunit {

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; `#` starts a comment; blank lines are skipped.
KeyValues parse_key_values(const std::string& text, const std::string& origin = "config");
KeyValues read_key_value_file(const std::string& path);
std::string format_key_values(const KeyValues& kv);

/// "key=value" as given on the command line.
std::pair<std::string, std::string> parse_override(const std::string& s);

enum class AblationMode { None, E1, E2, E3, E5, E6, Eq4 };

std::string to_string(AblationMode m);
AblationMode parse_ablation_mode(const std::string& s);

struct TrainConfig {
  // schedule
  Index total_epochs = 400;
  double lr_initial = 2e-4;
  double decay_start_fraction = 0.5;
  double beta1 = 0.5, beta2 = 0.999;
  // robustness term
  double beta = 1e-4;
  double perturbation_bound = 0.1;
  double robust_gate_fraction = 0.25;
  bool robust_ramp = false;         // linear ramp over the first quarter instead of a hard gate
  Index robust_patches = 256;
  std::string active_scales;        // comma list of 1-based scales; empty = all
  Index robust_random_subset = 0;   // per-iteration random subset size; 0 = all active scales
  bool train_heads_in_robust = false;
  bool stop_perturbed_input = false;
  Index robust_samples = 1;
  // contrastive and adversarial weights
  double lambda_gan = 1.0;
  double lambda_nce = 1.0;
  double lambda_nce_identity = 1.0;
  double nce_temperature = 0.07;
  Index nce_patches = 256;
  // ablations
  AblationMode ablation_mode = AblationMode::None;
  double ablation_coef = 1e-4;
  bool e1_absolute = false;
  std::string e1_stats = "once";    // "once" or "epoch"
  Index e2_bins = 16;
  Index e2_patch = 16;
  Index e2_patches = 256;
  bool e6_at_samples = false;
  // data
  std::string data_root;
  std::string domain_a = "domainA", domain_b = "domainB";
  Index max_images = -1;
  Index batch_size = 1;
  Index crop_size = 256;
  bool flip = true;
  Index pool_size = 50;
  Index max_steps_per_epoch = 0;    // 0 = one pass over domain A
  std::uint64_t seed = 0;
  // architecture
  std::string gen_arch = "resnet";
  Index image_channels = 3;
  Index ngf = 8;
  Index n_blocks = 2;
  bool gen_norm = true;
  std::string feature_layers;       // comma list of layer ends; empty = defaults
  Index head_hidden = 256;
  Index head_dim = 256;
  Index ndf = 8;
  Index d_strided = 2;
  double init_std = 0.02;
  // outputs
  Index checkpoint_every = 10;      // epochs; 0 = final only
  Index sample_every = 10;          // epochs; 0 = never
  Index sample_count = 4;

  /// Reads every key it knows; unknown keys raise ConfigError.
  static TrainConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  void validate() const;

  std::vector<Index> parsed_active_scales() const;
  std::vector<Index> parsed_feature_layers() const;

  /// Keys that determine parameter shapes; these must agree between a
  /// checkpoint and the configuration it is loaded into.
  static const std::vector<std::string>& architecture_keys();
};

/// lr_initial before total * decay_start_fraction, then linear to 0 at total.
double lr_at(const TrainConfig& cfg, double epoch);

/// False iff epoch < total * robust_gate_fraction.
bool robust_loss_active(const TrainConfig& cfg, double epoch);

/// Multiplier of the gated term: 0/1 for the hard gate. With robust_ramp it
/// rises as (epoch - gate + 1) / (total * gate_fraction), capped at 1, once the
/// gate is open.
double robust_gate_weight(const TrainConfig& cfg, double epoch);

std::vector<Index> parse_index_list(const std::string& s, const std::string& what);
std::vector<double> parse_double_list(const std::string& s, const std::string& what);

}  // namespace srunit

#include "srunit/training/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace srunit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field field(const std::string& key, T TrainConfig::*m) {
  Field f;
  f.get = [m](const TrainConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, bool>) {
      return c.*m ? "true" : "false";
    } else if constexpr (std::is_same_v<T, double>) {
      return format_double(c.*m);
    } else if constexpr (std::is_same_v<T, std::string>) {
      return c.*m;
    } else if constexpr (std::is_same_v<T, AblationMode>) {
      return to_string(c.*m);
    } else {
      return std::to_string(c.*m);
    }
  };
  f.set = [key, m](TrainConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, bool>) {
      c.*m = to_bool(key, v);
    } else if constexpr (std::is_same_v<T, double>) {
      c.*m = to_double(key, v);
    } else if constexpr (std::is_same_v<T, std::string>) {
      c.*m = v;
    } else if constexpr (std::is_same_v<T, AblationMode>) {
      c.*m = parse_ablation_mode(v);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      const long long i = to_int(key, v);
      if (i < 0) throw ConfigError("key '" + key + "' must be >= 0");
      c.*m = static_cast<std::uint64_t>(i);
    } else {
      c.*m = static_cast<T>(to_int(key, v));
    }
  };
  return f;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"total_epochs", field("total_epochs", &TrainConfig::total_epochs)},
      {"lr_initial", field("lr_initial", &TrainConfig::lr_initial)},
      {"decay_start_fraction", field("decay_start_fraction", &TrainConfig::decay_start_fraction)},
      {"adam_beta1", field("adam_beta1", &TrainConfig::beta1)},
      {"adam_beta2", field("adam_beta2", &TrainConfig::beta2)},
      {"beta", field("beta", &TrainConfig::beta)},
      {"perturbation_bound", field("perturbation_bound", &TrainConfig::perturbation_bound)},
      {"robust_gate_fraction", field("robust_gate_fraction", &TrainConfig::robust_gate_fraction)},
      {"robust_ramp", field("robust_ramp", &TrainConfig::robust_ramp)},
      {"robust_patches", field("robust_patches", &TrainConfig::robust_patches)},
      {"active_scales", field("active_scales", &TrainConfig::active_scales)},
      {"robust_random_subset", field("robust_random_subset", &TrainConfig::robust_random_subset)},
      {"train_heads_in_robust", field("train_heads_in_robust", &TrainConfig::train_heads_in_robust)},
      {"stop_perturbed_input", field("stop_perturbed_input", &TrainConfig::stop_perturbed_input)},
      {"robust_samples", field("robust_samples", &TrainConfig::robust_samples)},
      {"lambda_gan", field("lambda_gan", &TrainConfig::lambda_gan)},
      {"lambda_nce", field("lambda_nce", &TrainConfig::lambda_nce)},
      {"lambda_nce_identity", field("lambda_nce_identity", &TrainConfig::lambda_nce_identity)},
      {"nce_temperature", field("nce_temperature", &TrainConfig::nce_temperature)},
      {"nce_patches", field("nce_patches", &TrainConfig::nce_patches)},
      {"ablation_mode", field("ablation_mode", &TrainConfig::ablation_mode)},
      {"ablation_coef", field("ablation_coef", &TrainConfig::ablation_coef)},
      {"e1_absolute", field("e1_absolute", &TrainConfig::e1_absolute)},
      {"e1_stats", field("e1_stats", &TrainConfig::e1_stats)},
      {"e2_bins", field("e2_bins", &TrainConfig::e2_bins)},
      {"e2_patch", field("e2_patch", &TrainConfig::e2_patch)},
      {"e2_patches", field("e2_patches", &TrainConfig::e2_patches)},
      {"e6_at_samples", field("e6_at_samples", &TrainConfig::e6_at_samples)},
      {"data_root", field("data_root", &TrainConfig::data_root)},
      {"domain_a", field("domain_a", &TrainConfig::domain_a)},
      {"domain_b", field("domain_b", &TrainConfig::domain_b)},
      {"max_images", field("max_images", &TrainConfig::max_images)},
      {"batch_size", field("batch_size", &TrainConfig::batch_size)},
      {"crop_size", field("crop_size", &TrainConfig::crop_size)},
      {"flip", field("flip", &TrainConfig::flip)},
      {"pool_size", field("pool_size", &TrainConfig::pool_size)},
      {"max_steps_per_epoch", field("max_steps_per_epoch", &TrainConfig::max_steps_per_epoch)},
      {"seed", field("seed", &TrainConfig::seed)},
      {"gen_arch", field("gen_arch", &TrainConfig::gen_arch)},
      {"image_channels", field("image_channels", &TrainConfig::image_channels)},
      {"ngf", field("ngf", &TrainConfig::ngf)},
      {"n_blocks", field("n_blocks", &TrainConfig::n_blocks)},
      {"gen_norm", field("gen_norm", &TrainConfig::gen_norm)},
      {"feature_layers", field("feature_layers", &TrainConfig::feature_layers)},
      {"head_hidden", field("head_hidden", &TrainConfig::head_hidden)},
      {"head_dim", field("head_dim", &TrainConfig::head_dim)},
      {"ndf", field("ndf", &TrainConfig::ndf)},
      {"d_strided", field("d_strided", &TrainConfig::d_strided)},
      {"init_std", field("init_std", &TrainConfig::init_std)},
      {"checkpoint_every", field("checkpoint_every", &TrainConfig::checkpoint_every)},
      {"sample_every", field("sample_every", &TrainConfig::sample_every)},
      {"sample_count", field("sample_count", &TrainConfig::sample_count)},
  };
  return table;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path);
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::pair<std::string, std::string> parse_override(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + s + "' is not key=value");
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::None: return "none";
    case AblationMode::E1: return "E1";
    case AblationMode::E2: return "E2";
    case AblationMode::E3: return "E3";
    case AblationMode::E5: return "E5";
    case AblationMode::E6: return "E6";
    case AblationMode::Eq4: return "eq4";
  }
  return "none";
}

AblationMode parse_ablation_mode(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "none") return AblationMode::None;
  if (l == "e1") return AblationMode::E1;
  if (l == "e2") return AblationMode::E2;
  if (l == "e3") return AblationMode::E3;
  if (l == "e4" || l == "eq4") return AblationMode::Eq4;
  if (l == "e5") return AblationMode::E5;
  if (l == "e6") return AblationMode::E6;
  throw ConfigError("unknown ablation mode '" + s + "' (none, E1, E2, E3, E5, E6, eq4)");
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) {
  TrainConfig c;
  const auto& table = fields();
  for (const auto& [k, v] : kv) {
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError("unknown config key '" + k + "'");
    it->second.set(c, v);
  }
  c.validate();
  return c;
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues kv;
  for (const auto& [k, f] : fields()) kv[k] = f.get(*this);
  return kv;
}

const std::vector<std::string>& TrainConfig::architecture_keys() {
  static const std::vector<std::string> keys = {"gen_arch", "image_channels", "ngf",      "n_blocks", "gen_norm",
                                                "feature_layers", "head_hidden",  "head_dim", "ndf",      "d_strided"};
  return keys;
}

std::vector<Index> parse_index_list(const std::string& s, const std::string& what) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(static_cast<Index>(to_int(what, tok)));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(to_double(what, tok));
  }
  return out;
}

std::vector<Index> TrainConfig::parsed_active_scales() const { return parse_index_list(active_scales, "active_scales"); }
std::vector<Index> TrainConfig::parsed_feature_layers() const {
  return parse_index_list(feature_layers, "feature_layers");
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(total_epochs >= 0, "total_epochs must be >= 0");
  need(lr_initial > 0, "lr_initial must be > 0");
  need(decay_start_fraction >= 0 && decay_start_fraction < 1, "decay_start_fraction must be in [0, 1)");
  need(beta >= 0, "beta must be >= 0");
  need(perturbation_bound >= 1e-7, "perturbation_bound must be >= 1e-7");
  // 0 is accepted as "always on"; the default quarter gate lies strictly inside (0, 1).
  need(robust_gate_fraction >= 0 && robust_gate_fraction < 1, "robust_gate_fraction must be in [0, 1)");
  need(robust_patches >= 1 && nce_patches >= 2, "robust_patches >= 1 and nce_patches >= 2 required");
  need(robust_samples >= 1, "robust_samples must be >= 1");
  need(robust_random_subset >= 0, "robust_random_subset must be >= 0");
  need(nce_temperature > 0, "nce_temperature must be > 0");
  need(ablation_coef >= 0, "ablation_coef must be >= 0");
  need(e1_stats == "once" || e1_stats == "epoch", "e1_stats must be 'once' or 'epoch'");
  need(e2_bins >= 2 && e2_patch >= 1 && e2_patches >= 2 && e2_patches % 2 == 0, "invalid E2 settings");
  need(batch_size >= 1, "batch_size must be >= 1");
  need(crop_size >= 4, "crop_size must be >= 4");
  need(pool_size >= 0, "pool_size must be >= 0");
  need(max_steps_per_epoch >= 0, "max_steps_per_epoch must be >= 0");
  need(gen_arch == "resnet" || gen_arch == "identity", "gen_arch must be 'resnet' or 'identity'");
  need(ngf >= 1 && n_blocks >= 0 && head_hidden >= 1 && head_dim >= 1 && ndf >= 1 && d_strided >= 0,
       "architecture sizes must be positive");
  need(image_channels >= 1, "image_channels must be >= 1");
  need(init_std > 0, "init_std must be > 0");
  need(checkpoint_every >= 0 && sample_every >= 0 && sample_count >= 0, "output cadences must be >= 0");
  parsed_active_scales();
  parsed_feature_layers();
}

double lr_at(const TrainConfig& cfg, double epoch) {
  const double total = static_cast<double>(cfg.total_epochs);
  const double start = total * cfg.decay_start_fraction;
  if (epoch < start) return cfg.lr_initial;
  if (epoch >= total) return 0.0;
  return cfg.lr_initial * (total - epoch) / (total - start);
}

bool robust_loss_active(const TrainConfig& cfg, double epoch) {
  return !(epoch < static_cast<double>(cfg.total_epochs) * cfg.robust_gate_fraction);
}

double robust_gate_weight(const TrainConfig& cfg, double epoch) {
  if (!robust_loss_active(cfg, epoch)) return 0.0;
  if (!cfg.robust_ramp) return 1.0;
  const double gate = static_cast<double>(cfg.total_epochs) * cfg.robust_gate_fraction;
  const double len = std::max(1.0, gate);
  return std::min(1.0, (epoch - std::ceil(gate) + 1) / len);
}

}  // namespace srunit

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "srunit/training/trainer.hpp"

namespace srunit {

namespace {

using json = nlohmann::json;
constexpr const char* kFormat = "srunit-checkpoint";
constexpr int kVersion = 1;

json to_binary(const Tensor<Real>::Vector& v) {
  std::vector<std::uint8_t> bytes(static_cast<size_t>(v.size()) * sizeof(Real));
  if (!bytes.empty()) std::memcpy(bytes.data(), v.data(), bytes.size());
  return json::binary(std::move(bytes));
}

Tensor<Real>::Vector from_binary(const json& j, Index expected, const std::string& what) {
  if (!j.is_binary()) throw CheckpointError(what + ": expected a binary array");
  const auto& bytes = j.get_binary();
  if (bytes.size() != static_cast<size_t>(expected) * sizeof(Real))
    throw CheckpointError(what + ": holds " + std::to_string(bytes.size() / sizeof(Real)) + " values, expected " +
                          std::to_string(expected));
  Tensor<Real>::Vector v(expected);
  if (expected > 0) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

json shape_json(const Shape& s) {
  json a = json::array();
  for (Index i = 0; i < s.rank(); ++i) a.push_back(s[i]);
  return a;
}

json params_json(const ParamList<Real>& params) {
  json arr = json::array();
  for (const auto& p : params)
    arr.push_back({{"name", p.name}, {"shape", shape_json(p.var.shape())}, {"data", to_binary(p.var.value().vec())}});
  return arr;
}

json adam_json(const Adam<Real>& a) {
  json m = json::array(), v = json::array();
  for (const auto& x : a.first_moments()) m.push_back(to_binary(x));
  for (const auto& x : a.second_moments()) v.push_back(to_binary(x));
  return {{"steps", a.steps()}, {"m", m}, {"v", v}};
}

/// Decoded values waiting to be committed.
struct Staged {
  std::vector<Tensor<Real>::Vector> values;
};

Staged stage_params(const json& arr, const ParamList<Real>& params, const std::string& group) {
  if (!arr.is_array() || arr.size() != params.size())
    throw CheckpointError(group + ": parameter count " + std::to_string(arr.size()) + " differs from model (" +
                          std::to_string(params.size()) + ")");
  Staged s;
  for (size_t i = 0; i < params.size(); ++i) {
    const json& e = arr[i];
    const std::string name = e.at("name").get<std::string>();
    if (name != params[i].name) throw CheckpointError(group + ": parameter '" + name + "' where model has '" + params[i].name + "'");
    if (e.at("shape") != shape_json(params[i].var.shape()))
      throw CheckpointError(group + "." + name + ": shape " + e.at("shape").dump() + " differs from model " +
                            params[i].var.shape().str());
    s.values.push_back(from_binary(e.at("data"), params[i].var.value().numel(), group + "." + name));
  }
  return s;
}

struct StagedAdam {
  std::int64_t steps = 0;
  std::vector<Tensor<Real>::Vector> m, v;
};

StagedAdam stage_adam(const json& j, const Adam<Real>& a, const std::string& group) {
  StagedAdam s;
  s.steps = j.at("steps").get<std::int64_t>();
  const auto& pm = a.first_moments();
  if (j.at("m").size() != pm.size() || j.at("v").size() != pm.size())
    throw CheckpointError(group + ": optimizer moment count differs from model");
  for (size_t i = 0; i < pm.size(); ++i) {
    s.m.push_back(from_binary(j["m"][i], pm[i].size(), group + ".m"));
    s.v.push_back(from_binary(j["v"][i], pm[i].size(), group + ".v"));
  }
  return s;
}

}  // namespace

void save_checkpoint(const TrainState& s, const std::filesystem::path& path) {
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["config"] = s.cfg.to_key_values();
  j["generator"] = params_json(s.g->parameters());
  j["heads"] = params_json(head_parameters(s.heads));
  j["discriminator"] = params_json(s.d->parameters());
  j["adam_g"] = adam_json(*s.opt_g);
  j["adam_d"] = adam_json(*s.opt_d);
  json pool_imgs = json::array();
  json pool_shapes = json::array();
  for (const auto& im : s.pool->images()) {
    pool_imgs.push_back(to_binary(im.vec()));
    pool_shapes.push_back(shape_json(im.shape()));
  }
  j["pool"] = {{"images", pool_imgs}, {"shapes", pool_shapes}, {"rng", s.pool->rng().state()}};
  j["rng"] = {{"data", s.data_rng.state()}, {"loss", s.loss_rng.state()}};
  j["epoch"] = s.epoch;
  j["iteration"] = s.iteration;
  j["position"] = s.position;
  j["order_a"] = s.order_a;
  j["e1"] = {{"ready", s.e1_ready}, {"mu_x", s.e1.mu_x}, {"sigma_x", s.e1.sigma_x}, {"mu_y", s.e1.mu_y},
             {"sigma_y", s.e1.sigma_y}, {"absolute", s.e1.absolute}};

  const auto bytes = json::to_cbor(j);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write on " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

json read_checkpoint_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::from_cbor(bytes);
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormat)
    throw CheckpointError(path.string() + " is not a srunit checkpoint");
  if (j.value("version", 0) != kVersion)
    throw CheckpointError("unsupported checkpoint version " + j["version"].dump());
  return j;
}

}  // namespace

TrainState load_checkpoint(const std::filesystem::path& path) {
  const json j = read_checkpoint_json(path);
  TrainConfig cfg;
  try {
    cfg = TrainConfig::from_key_values(j.at("config").get<KeyValues>());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  TrainState s = make_state(cfg);
  load_checkpoint_into(path, s);
  return s;
}

void load_checkpoint_into(const std::filesystem::path& path, TrainState& s) {
  const json j = read_checkpoint_json(path);
  try {
    const KeyValues stored = j.at("config").get<KeyValues>();
    const KeyValues mine = s.cfg.to_key_values();
    for (const auto& key : TrainConfig::architecture_keys()) {
      const auto it = stored.find(key);
      const std::string theirs = it == stored.end() ? "<missing>" : it->second;
      if (theirs != mine.at(key))
        throw CheckpointError("architecture mismatch on '" + key + "': checkpoint has " + theirs + ", model has " +
                              mine.at(key));
    }

    // Decode and validate everything before touching the state.
    const auto gp = s.g->parameters();
    const auto hp = head_parameters(s.heads);
    const auto dp = s.d->parameters();
    const Staged g = stage_params(j.at("generator"), gp, "generator");
    const Staged h = stage_params(j.at("heads"), hp, "heads");
    const Staged d = stage_params(j.at("discriminator"), dp, "discriminator");
    const StagedAdam ag = stage_adam(j.at("adam_g"), *s.opt_g, "adam_g");
    const StagedAdam ad = stage_adam(j.at("adam_d"), *s.opt_d, "adam_d");

    std::vector<Tensor<Real>> pool;
    const json& pj = j.at("pool");
    if (pj.at("images").size() != pj.at("shapes").size()) throw CheckpointError("pool: images/shapes differ");
    if (static_cast<Index>(pj.at("images").size()) > s.pool->capacity())
      throw CheckpointError("pool: more images than capacity");
    for (size_t i = 0; i < pj["images"].size(); ++i) {
      Shape sh(pj["shapes"][i].get<std::vector<Index>>());
      pool.emplace_back(sh, from_binary(pj["images"][i], sh.numel(), "pool"));
    }
    Rng data_rng, loss_rng;
    data_rng.set_state(j.at("rng").at("data").get<std::string>());
    loss_rng.set_state(j.at("rng").at("loss").get<std::string>());
    const std::string pool_rng = pj.at("rng").get<std::string>();
    Rng probe;  // rejects a bad pool stream before commit
    probe.set_state(pool_rng);

    const Index epoch = j.at("epoch").get<Index>();
    const Index iteration = j.at("iteration").get<Index>();
    const Index position = j.at("position").get<Index>();
    const auto order_a = j.at("order_a").get<std::vector<Index>>();
    const json& ej = j.at("e1");
    const bool e1_ready = ej.at("ready").get<bool>();
    DistanceLossParams e1;
    e1.mu_x = ej.at("mu_x").get<double>();
    e1.sigma_x = ej.at("sigma_x").get<double>();
    e1.mu_y = ej.at("mu_y").get<double>();
    e1.sigma_y = ej.at("sigma_y").get<double>();
    e1.absolute = ej.at("absolute").get<bool>();

    // Commit; nothing below can fail.
    auto commit = [](const ParamList<Real>& params, const Staged& st) {
      for (size_t i = 0; i < params.size(); ++i) {
        Var<Real> v = params[i].var;
        v.mutable_value().vec() = st.values[i];
        v.zero_grad();
      }
    };
    commit(gp, g);
    commit(hp, h);
    commit(dp, d);
    auto commit_adam = [](Adam<Real>& a, const StagedAdam& st) {
      a.set_steps(st.steps);
      a.first_moments() = st.m;
      a.second_moments() = st.v;
    };
    commit_adam(*s.opt_g, ag);
    commit_adam(*s.opt_d, ad);
    s.pool->restore(std::move(pool), pool_rng);
    s.data_rng = data_rng;
    s.loss_rng = loss_rng;
    s.epoch = epoch;
    s.iteration = iteration;
    s.position = position;
    s.order_a = order_a;
    s.e1 = e1;
    s.e1_ready = e1_ready;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace srunit

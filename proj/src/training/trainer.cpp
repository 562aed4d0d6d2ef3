#include "srunit/training/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace srunit {

namespace {

/// Turns gradient tracking off for a parameter list while in scope.
class FrozenParams {
 public:
  explicit FrozenParams(const ParamList<Real>& p) : params_(p) { set_requires_grad(params_, false); }
  ~FrozenParams() { set_requires_grad(params_, true); }
  FrozenParams(const FrozenParams&) = delete;
  FrozenParams& operator=(const FrozenParams&) = delete;

 private:
  ParamList<Real> params_;
};

void require_finite(const Var<Real>& v, const std::string& term) {
  if (!all_finite(v.value())) throw NumericError("non-finite value in loss term '" + term + "'");
}

/// Mean PatchNCE over scales and samples; keys come from `src`, queries from `out`.
Var<Real> nce_over_scales(TrainState& s, const Var<Real>& src, const Var<Real>& out, const NceConfig& nce) {
  const Index K = s.g->K();
  const auto fk = s.g->encode(src, K);
  const auto fq = s.g->encode(out, K);
  VarList<Real> terms;
  for (Index k = 0; k < K; ++k) {
    const Shape& sh = fk[static_cast<size_t>(k)].shape();
    const Index m = std::min(nce.patches_per_scale, sh[2] * sh[3]);
    for (Index n = 0; n < sh[0]; ++n) {
      auto coords = sample_patch_indices(s.loss_rng, sh[2], sh[3], m, n);
      const auto& head = s.heads[static_cast<size_t>(k)];
      const Var<Real> q = head.extract(fq[static_cast<size_t>(k)], coords, true).embeddings;
      const Var<Real> key = head.extract(fk[static_cast<size_t>(k)], coords, true).embeddings.detach();
      terms.push_back(patch_nce_loss(q, key, key, nce, true));
    }
  }
  return weighted_sum(terms, std::vector<Real>(terms.size(), Real(1) / static_cast<Real>(terms.size())));
}

Tensor<Real> make_batch(const std::vector<Image8>& imgs, const std::vector<Index>& ids, Index crop, bool flip,
                        Rng& rng) {
  const Image8& first = imgs.at(static_cast<size_t>(ids.at(0)));
  const Index size = std::min({crop, first.height, first.width});
  Tensor<Real> t(Shape{static_cast<Index>(ids.size()), first.channels, size, size});
  for (size_t b = 0; b < ids.size(); ++b) {
    const Image8& im = imgs.at(static_cast<size_t>(ids[b]));
    if (im.channels != first.channels || im.height < size || im.width < size)
      throw DimensionError("training images differ in size or channel count");
    const Index top = im.height > size ? static_cast<Index>(rng.below(static_cast<std::uint64_t>(im.height - size + 1))) : 0;
    const Index left = im.width > size ? static_cast<Index>(rng.below(static_cast<std::uint64_t>(im.width - size + 1))) : 0;
    const bool mirror = flip && rng.uniform() < 0.5;
    for (Index c = 0; c < im.channels; ++c)
      for (Index y = 0; y < size; ++y)
        for (Index x = 0; x < size; ++x) {
          const Index sx = mirror ? left + size - 1 - x : left + x;
          t.at(static_cast<Index>(b), c, y, x) = static_cast<Real>(im.at(top + y, sx, c) / 127.5 - 1.0);
        }
  }
  return t;
}

}  // namespace

double LossReport::get(const std::string& name) const {
  for (const auto& [k, v] : terms)
    if (k == name) return v;
  throw ArgumentError("loss report has no term '" + name + "'");
}

bool LossReport::has(const std::string& name) const {
  for (const auto& t : terms)
    if (t.first == name) return true;
  return false;
}

void LossReport::set(const std::string& name, double v) {
  for (auto& t : terms)
    if (t.first == name) {
      t.second = v;
      return;
    }
  terms.emplace_back(name, v);
}

ParamList<Real> TrainState::generator_params() const {
  ParamList<Real> p = g->parameters();
  for (auto& q : head_parameters(heads)) p.push_back(q);
  return p;
}

ParamList<Real> TrainState::discriminator_params() const { return d->parameters(); }

GeneratorConfig generator_config(const TrainConfig& cfg) {
  GeneratorConfig g;
  g.arch = cfg.gen_arch;
  g.in_channels = g.out_channels = cfg.image_channels;
  g.ngf = cfg.ngf;
  g.n_blocks = cfg.n_blocks;
  g.norm = cfg.gen_norm;
  g.init_std = cfg.init_std;
  g.feature_layers = cfg.parsed_feature_layers();
  return g;
}

DiscriminatorConfig discriminator_config(const TrainConfig& cfg) {
  DiscriminatorConfig d;
  d.in_channels = cfg.image_channels;
  d.ndf = cfg.ndf;
  d.n_strided = cfg.d_strided;
  d.init_std = cfg.init_std;
  return d;
}

TrainState make_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.cfg = cfg;
  Rng root(cfg.seed);
  Rng init = root.split();
  s.g = std::make_unique<GeneratorSlices<Real>>(make_generator<Real>(generator_config(cfg), init));
  s.heads = make_feature_heads<Real>(*s.g, cfg.head_hidden, cfg.head_dim, cfg.init_std, init);
  s.d = std::make_unique<PatchDiscriminator<Real>>(make_discriminator<Real>(discriminator_config(cfg), init));
  AdamConfig ac;
  ac.lr = lr_at(cfg, 0);
  ac.beta1 = cfg.beta1;
  ac.beta2 = cfg.beta2;
  s.opt_g = std::make_unique<Adam<Real>>(s.generator_params(), ac);
  s.opt_d = std::make_unique<Adam<Real>>(s.discriminator_params(), ac);
  s.pool = std::make_unique<ImagePool<Real>>(cfg.pool_size, root.next_u64());
  s.data_rng = root.split();
  s.loss_rng = root.split();
  return s;
}

Index TrainData::steps_per_epoch(const TrainConfig& cfg) const {
  Index steps = std::max<Index>(1, static_cast<Index>(a.size()) / cfg.batch_size);
  if (cfg.max_steps_per_epoch > 0) steps = std::min(steps, cfg.max_steps_per_epoch);
  return steps;
}

TrainData load_train_data(const TrainConfig& cfg) {
  if (cfg.data_root.empty()) throw ConfigError("data_root is not set");
  TrainData d;
  d.a = load_domain(cfg.data_root, cfg.domain_a, cfg.max_images).images;
  d.b = load_domain(cfg.data_root, cfg.domain_b, cfg.max_images).images;
  if (d.a.empty() || d.b.empty()) throw IoError("both domains need at least one image");
  for (const auto* dom : {&d.a, &d.b})
    for (const auto& im : *dom)
      if (im.channels != cfg.image_channels)
        throw ConfigError("image has " + std::to_string(im.channels) + " channels, config says " +
                          std::to_string(cfg.image_channels));
  return d;
}

DistanceLossParams distance_stats(const TrainData& data, bool absolute) {
  auto stats = [](const std::vector<Image8>& imgs) {
    std::vector<Tensor<double>> t;
    for (const auto& im : imgs) t.push_back(to_tensor<double>({im}));
    return half_distance_stats(t);
  };
  DistanceLossParams p;
  std::tie(p.mu_x, p.sigma_x) = stats(data.a);
  std::tie(p.mu_y, p.sigma_y) = stats(data.b);
  // A domain of identical images has zero spread; fall back to unit scale.
  if (!(p.sigma_x > 0)) p.sigma_x = 1;
  if (!(p.sigma_y > 0)) p.sigma_y = 1;
  p.absolute = absolute;
  return p;
}

LossReport train_step(TrainState& s, const Tensor<Real>& xt, const Tensor<Real>& yt) {
  const TrainConfig& cfg = s.cfg;
  const double epoch = static_cast<double>(s.epoch);
  const double lr = lr_at(cfg, epoch);
  const double gate = robust_gate_weight(cfg, epoch);
  s.opt_g->set_lr(lr);
  s.opt_d->set_lr(lr);

  LossReport rep;
  rep.epoch = s.epoch;
  rep.iteration = s.iteration;
  rep.set("lr", lr);
  rep.set("gate", gate);

  const Var<Real> x = constant(xt), y = constant(yt);
  const Var<Real> fake = s.g->forward(x);
  require_finite(fake, "generator output");

  // Discriminator update on real y against pool-queried fakes.
  {
    FrozenParams freeze(s.generator_params());
    s.opt_d->zero_grad();
    const Var<Real> pooled = constant(s.pool->query(fake.value()));
    Var<Real> loss_d = scale(gan_loss_d(*s.d, y, pooled), static_cast<Real>(cfg.lambda_gan));
    require_finite(loss_d, "gan_d");
    rep.set("gan_d", loss_d.item());
    if (cfg.ablation_mode == AblationMode::E6) {
      double v = 0;
      if (gate > 0 && cfg.ablation_coef > 0) {
        const auto pt = cfg.e6_at_samples ? LipschitzPoint::Sample : LipschitzPoint::ChannelMean;
        const Var<Real> pen = lipschitz_penalty_e6(*s.d, xt, fake.value(), pt);
        require_finite(pen, "E6");
        v = pen.item();
        loss_d = add(loss_d, scale(pen, static_cast<Real>(gate * cfg.ablation_coef)));
      }
      rep.set("E6", v);
    }
    backward(loss_d);
    s.opt_d->step();
  }

  // Generator and feature-head update.
  FrozenParams freeze(s.discriminator_params());
  s.opt_g->zero_grad();
  NceConfig nce;
  nce.temperature = cfg.nce_temperature;
  nce.patches_per_scale = cfg.nce_patches;

  VarList<Real> terms;
  std::vector<Real> weights;
  auto add_term = [&](const std::string& name, const Var<Real>& v, double w) {
    require_finite(v, name);
    rep.set(name, v.item());
    if (w != 0) {
      terms.push_back(v);
      weights.push_back(static_cast<Real>(w));
    }
  };

  add_term("gan_g", gan_loss_g(*s.d, fake), cfg.lambda_gan);
  if (cfg.lambda_nce > 0) {
    add_term("nce", nce_over_scales(s, x, fake, nce), cfg.lambda_nce);
  } else {
    rep.set("nce", 0);
  }
  if (cfg.lambda_nce_identity > 0) {
    const Var<Real> idt = s.g->forward(y);
    add_term("nce_identity", nce_over_scales(s, y, idt, nce), cfg.lambda_nce_identity);
  } else {
    rep.set("nce_identity", 0);
  }

  const AblationMode mode = cfg.ablation_mode;
  const bool robust_family = mode == AblationMode::None || mode == AblationMode::E3 || mode == AblationMode::Eq4;
  rep.set("robust", 0);
  if (robust_family && gate > 0 && cfg.beta > 0) {
    std::vector<Index> scales = cfg.parsed_active_scales();
    if (scales.empty())
      for (Index k = 1; k <= s.g->K(); ++k) scales.push_back(k);
    if (cfg.robust_random_subset > 0 && cfg.robust_random_subset < static_cast<Index>(scales.size())) {
      s.loss_rng.shuffle(scales);
      scales.resize(static_cast<size_t>(cfg.robust_random_subset));
      std::sort(scales.begin(), scales.end());
    }
    RobustOptions ro;
    ro.train_heads = cfg.train_heads_in_robust;
    ro.stop_perturbed_input = cfg.stop_perturbed_input;
    ro.n_samples = cfg.robust_samples;
    const RobustVariant variant = mode == AblationMode::E3    ? RobustVariant::FeatureSpace
                                  : mode == AblationMode::Eq4 ? RobustVariant::Direct
                                                              : RobustVariant::Adaptive;
    add_term("robust",
             robust_loss_total(*s.g, s.heads, x, cfg.perturbation_bound, s.loss_rng, scales, cfg.robust_patches,
                               variant, ro),
             gate * cfg.beta);
  }

  if (mode == AblationMode::E1 || mode == AblationMode::E2 || mode == AblationMode::E5) {
    const std::string name = to_string(mode);
    if (gate > 0 && cfg.ablation_coef > 0) {
      const double w = gate * cfg.ablation_coef;
      if (mode == AblationMode::E1) {
        if (!s.e1_ready) throw InvariantError("E1 statistics were not computed before training");
        add_term(name, distance_loss_e1(x, fake, s.e1), w);
      } else if (mode == AblationMode::E2) {
        const Index patch = std::min({cfg.e2_patch, xt.h(), xt.w()});
        const auto pairs = sample_patch_pairs(s.loss_rng, xt.n(), xt.h(), xt.w(), patch, cfg.e2_patches);
        add_term(name, smoothness_loss_e2(x, fake, pairs, patch, cfg.e2_bins), w);
      } else {
        const auto shapes = s.g->slice_output_shapes(xt.shape());
        std::vector<std::vector<Coord>> coords;
        for (Index k = 0; k < s.g->K(); ++k) {
          const Shape& sh = shapes[static_cast<size_t>(k)];
          coords.push_back(sample_batch_patch_indices(s.loss_rng, sh[0], sh[2], sh[3],
                                                      std::min(cfg.robust_patches, sh[2] * sh[3])));
        }
        add_term(name, semantics_consistency_e5(*s.g, s.heads, x, coords, cfg.train_heads_in_robust, fake), w);
      }
    } else {
      rep.set(name, 0);
    }
  }

  const Var<Real> total = weighted_sum(terms, weights);
  require_finite(total, "total_g");
  rep.set("total_g", total.item());
  backward(total);
  s.opt_g->step();
  ++s.iteration;
  return rep;
}

LossReport advance(TrainState& s, const TrainData& data) {
  if (s.epoch >= s.cfg.total_epochs) throw ArgumentError("training already finished");
  const Index steps = data.steps_per_epoch(s.cfg);
  const Index bs = s.cfg.batch_size;
  if (s.position == 0 || s.order_a.size() != data.a.size()) {
    s.order_a.resize(data.a.size());
    for (size_t i = 0; i < data.a.size(); ++i) s.order_a[i] = static_cast<Index>(i);
    s.data_rng.shuffle(s.order_a);
  }
  if (s.cfg.ablation_mode == AblationMode::E1 && (!s.e1_ready || (s.cfg.e1_stats == "epoch" && s.position == 0))) {
    s.e1 = distance_stats(data, s.cfg.e1_absolute);
    s.e1_ready = true;
  }
  std::vector<Index> ia, ib;
  for (Index j = 0; j < bs; ++j) {
    ia.push_back(s.order_a[static_cast<size_t>((s.position * bs + j) % static_cast<Index>(s.order_a.size()))]);
    ib.push_back(static_cast<Index>(s.data_rng.below(data.b.size())));
  }
  const Tensor<Real> x = make_batch(data.a, ia, s.cfg.crop_size, s.cfg.flip, s.data_rng);
  const Tensor<Real> y = make_batch(data.b, ib, s.cfg.crop_size, s.cfg.flip, s.data_rng);
  LossReport rep = train_step(s, x, y);
  if (++s.position >= steps) {
    s.position = 0;
    ++s.epoch;
  }
  return rep;
}

Tensor<Real> translate(const TrainState& s, const Tensor<Real>& x) {
  FrozenParams freeze(s.generator_params());
  return s.g->forward(constant(x)).value();
}

namespace {

std::string epoch_tag(Index e) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << e;
  return os.str();
}

void write_samples(const TrainState& s, const TrainData& data, const std::filesystem::path& path) {
  const Index n = std::min<Index>(s.cfg.sample_count, static_cast<Index>(data.a.size()));
  if (n <= 0) return;
  std::vector<Image8> tiles;
  for (Index i = 0; i < n; ++i) {
    const Tensor<Real> x = to_tensor<Real>({data.a[static_cast<size_t>(i)]});
    tiles.push_back(data.a[static_cast<size_t>(i)]);
    tiles.push_back(from_tensor(translate(s, x), 0));
  }
  std::filesystem::create_directories(path.parent_path());
  write_png(path.string(), tile_images(tiles, 2));
}

}  // namespace

void train_run(TrainState& s, const TrainData& data, const std::filesystem::path& run_dir, const RunOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(run_dir / "checkpoints");
  {
    std::ofstream cfg_out(run_dir / "config.txt");
    cfg_out << format_key_values(s.cfg.to_key_values());
  }
  const fs::path csv = run_dir / "losses.csv";
  const bool fresh_csv = !fs::exists(csv) || s.iteration == 0;
  std::ofstream log(csv, fresh_csv ? std::ios::trunc : std::ios::app);
  log << std::setprecision(9);
  bool header = !fresh_csv;

  while (s.epoch < s.cfg.total_epochs) {
    const Index epoch = s.epoch;
    LossReport r = advance(s, data);
    if (!header) {
      log << "epoch,iteration";
      for (const auto& t : r.terms) log << ',' << t.first;
      log << '\n';
      header = true;
    }
    log << r.epoch << ',' << r.iteration;
    for (const auto& t : r.terms) log << ',' << t.second;
    log << '\n';
    if (s.epoch != epoch) {  // epoch finished
      log.flush();
      if (!opt.quiet) {
        std::cerr << "epoch " << s.epoch << "/" << s.cfg.total_epochs;
        for (const auto& t : r.terms) std::cerr << ' ' << t.first << '=' << t.second;
        std::cerr << '\n';
      }
      if (s.cfg.checkpoint_every > 0 && s.epoch % s.cfg.checkpoint_every == 0)
        save_checkpoint(s, run_dir / "checkpoints" / ("epoch_" + epoch_tag(s.epoch) + ".ckpt"));
      if (s.cfg.sample_every > 0 && s.epoch % s.cfg.sample_every == 0)
        write_samples(s, data, run_dir / "samples" / ("epoch_" + epoch_tag(s.epoch) + ".png"));
    }
  }
  save_checkpoint(s, run_dir / "latest.ckpt");
  if (s.cfg.sample_every > 0) write_samples(s, data, run_dir / "samples" / "final.png");
}

}  // namespace srunit

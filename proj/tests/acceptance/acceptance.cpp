// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero if
// any selected criterion fails.
//
//   acceptance [--work DIR] [--only 1,2,...] [--quick]
//
// --quick shrinks the flip experiment to a smoke run (its verdict is then
// meaningless and it is reported as such).
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "../gradient_cases.hpp"
#include "srunit/data/split.hpp"
#include "srunit/evaluation/metrics.hpp"
#include "srunit/evaluation/report.hpp"
#include "srunit/training/trainer.hpp"

using namespace srunit;
using namespace srunit::test;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
  void require(bool ok, const std::string& why) {
    if (!ok) fail(why);
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// --- 1: gradients -------------------------------------------------------------

Verdict gradients() {
  Verdict v;
  const auto t0 = Clock::now();
  Index checked = 0;
  for (const auto& c : gradient_cases())
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = c.run(seed);
      checked += r.checked;
      v.require(r.ok, c.name + " seed " + std::to_string(seed) + ": " + r.detail);
    }
  Rng rng(3);
  auto g = toy_generator<double>(rng, 5);
  auto heads = toy_heads(g, rng);
  auto d = toy_discriminator<double>(rng);
  const Index params = std::max(parameter_count(concat(g.parameters(), head_parameters(heads))),
                                parameter_count(concat(g.parameters(), d.parameters())));
  v.require(params <= 500, "toy network has " + std::to_string(params) + " parameters");
  const double secs = seconds_since(t0);
  v.require(secs < 300, "took " + fmt(secs) + " s");
  if (v.pass)
    v.detail = "9 objectives x 20 seeds, " + std::to_string(checked) + " elements, largest toy net " +
               std::to_string(params) + " params, " + fmt(secs) + " s";
  return v;
}

// --- 2: closed forms ------------------------------------------------------------

Verdict closed_forms() {
  Verdict v;
  auto near = [&](double got, double want, const std::string& what) {
    v.require(std::abs(got - want) <= 1e-6, what + ": " + fmt(got) + " vs " + fmt(want));
  };
  Rng rng(1);

  GeneratorConfig icfg;
  icfg.arch = "identity";
  icfg.in_channels = icfg.out_channels = 1;
  const auto ig = make_generator<double>(icfg, rng);
  const auto x = constant(random_tensor<double>(Shape{2, 1, 5, 5}, rng));
  const auto coords = sample_batch_patch_indices(rng, 2, 5, 5, 10);
  for (Index k = 1; k <= ig.K(); ++k) {
    const auto id = FeatureHead<double>::identity(k, 1);
    near(robustness_loss_k(ig, id, x, k, 0.1, rng, coords).item(), 1.0, "identity L_" + std::to_string(k));
  }

  auto g = toy_generator<double>(rng, 3);
  const auto gx = constant(random_tensor<double>(Shape{1, 1, 6, 6}, rng));
  const auto gc = sample_patch_indices(rng, 6, 6, 8);
  for (Index k = 1; k <= g.K(); ++k) {
    FeatureHead<double> h(k, g.channels_after(k), 4, 4, 0.5, rng);
    auto p = h.parameters();
    p[0].var.mutable_value().vec().setZero();
    p[2].var.mutable_value().vec().setZero();
    p[3].var.mutable_value().vec() << 0.3, -1.0, 2.0, 0.5;
    near(robustness_loss_k(g, h, gx, k, 0.1, rng, gc).item(), 0.0, "constant-head L_" + std::to_string(k));
  }

  for (Index n : {4, 9, 16}) {
    Tensor<double> e(Shape{n, 4}, 0.5);
    near(patch_nce_loss(constant(e), constant(e), constant(e), NceConfig{}, false).item(), std::log(n + 1.0),
         "NCE symmetric N=" + std::to_string(n - 1));
  }

  Tensor<double> q(Shape{1, 2}), neg(Shape{1, 2});
  q.matrix() << 1, 0;
  neg.matrix() << 0, 1;
  NceConfig unit;
  unit.temperature = 1;
  const double one_neg = patch_nce_loss(constant(q), constant(q), constant(neg), unit, false).item();
  near(one_neg, std::log1p(std::exp(-1.0)), "NCE one negative");
  // The quoted 0.31326 is that value rounded to five places.
  v.require(std::round(one_neg * 1e5) == 31326, "NCE one negative does not round to 0.31326");

  Image8 a(1, 1, 3, 0), b(1, 1, 3, 0);
  b.data = {3, 4, 0};
  near(dist_l2(a, b), 5.0, "Dist 3-4-5");

  ConfusionMatrix cm(2);
  cm.counts << 3, 1, 2, 2;
  const auto s = segmentation_metrics(cm);
  near(s.pixel_accuracy, 0.625, "pxAcc");
  near(s.class_accuracy, 0.625, "clsAcc");
  near(s.mean_iou, 0.45, "mIoU");
  if (v.pass) v.detail = "identity L_k, constant-head L_k, ln(N+1), 0.31326, Dist 5, (0.625, 0.625, 0.45)";
  return v;
}

// --- 3: direct variant bounded by adaptive plus gap ------------------------------

Verdict direct_variant_bound() {
  Verdict v;
  const auto t0 = Clock::now();
  Rng rng(2024);
  double worst = -1e300;
  for (int cfg = 0; cfg < 100; ++cfg) {
    const Index K = 2 + cfg % 4;
    auto g = toy_generator<double>(rng, K, 1, 2, 0.3 + 0.02 * (cfg % 20));
    auto heads = toy_heads(g, rng);
    const auto x = constant(random_tensor<double>(Shape{1, 1, 5, 5}, rng));
    const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(K)));
    const auto coords = sample_patch_indices(rng, 5, 5, 6);
    const auto& h = heads[static_cast<size_t>(k - 1)];
    const auto tau = sample_perturbation<double>(Shape{1, g.channels_after(k), 5, 5}, 0.1, rng);
    const auto fx = g.encode(x, k).back();
    const auto fgx = g.encode(g.forward(x), k).back();
    const double lk = robustness_term(g, &h, k, fx, fgx, tau, coords, RobustVariant::Adaptive).item();
    const double ld = robustness_term(g, &h, k, fx, fgx, tau, coords, RobustVariant::Direct).item();
    const Eigen::MatrixXd ea = h.extract(fgx, coords).embeddings.value().matrix();
    const Eigen::MatrixXd eb = h.extract(fx, coords).embeddings.value().matrix();
    double gap = 0;
    for (size_t i = 0; i < coords.size(); ++i)
      gap += (ea.row(static_cast<Index>(i)) - eb.row(static_cast<Index>(i))).norm() /
             tau.magnitude(coords[i].n, coords[i].h, coords[i].w);
    gap /= static_cast<double>(coords.size());
    worst = std::max(worst, ld - lk - gap);
    v.require(ld <= lk + gap + 1e-6, "configuration " + std::to_string(cfg) + ": " + fmt(ld) + " > " +
                                         fmt(lk) + " + " + fmt(gap));
  }
  const double secs = seconds_since(t0);
  v.require(secs < 120, "took " + fmt(secs) + " s");
  if (v.pass) v.detail = "100 configurations, K in 2..5, max(L' - L - gap) = " + fmt(worst) + ", " + fmt(secs) + " s";
  return v;
}

// --- 4: perturbation sampler ----------------------------------------------------

Verdict sampler() {
  Verdict v;
  const double lo = 1e-7, hi = 0.1;
  // 100000 coordinates of 3-channel perturbations.
  const auto p = perturbation_from_seed<double>(Shape{10, 3, 100, 100}, hi, 99);
  std::vector<double> m(p.magnitudes.data(), p.magnitudes.data() + p.magnitudes.numel());
  v.require(m.size() == 100000u, "sample count");
  std::sort(m.begin(), m.end());
  const double n = static_cast<double>(m.size());
  double ks = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    const double f = (m[i] - lo) / (hi - lo);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  const double crit = 1.6276 / std::sqrt(n);  // Kolmogorov, alpha = 0.01
  v.require(ks < crit, "KS " + fmt(ks) + " >= " + fmt(crit));

  Index outside = 0;
  for (Index b = 0; b < 10; ++b)
    for (Index i = 0; i < 100; ++i)
      for (Index j = 0; j < 100; ++j) {
        double s = 0;
        for (Index c = 0; c < 3; ++c) s += p.tau.at(b, c, i, j) * p.tau.at(b, c, i, j);
        s = std::sqrt(s);
        outside += s < lo * (1 - 1e-9) || s > hi * (1 + 1e-9);
      }
  v.require(outside == 0, std::to_string(outside) + " coordinate norms outside bounds");

  const auto again = perturbation_from_seed<double>(Shape{10, 3, 100, 100}, hi, 99);
  v.require(std::memcmp(again.tau.vec().data(), p.tau.vec().data(), sizeof(double) * static_cast<size_t>(p.tau.numel())) == 0,
            "same seed gave different bits");
  if (v.pass) v.detail = "KS D = " + fmt(ks) + " < " + fmt(crit) + ", norms in bounds, bitwise repeatable";
  return v;
}

// --- 5: metric oracles -----------------------------------------------------------

Image8 random_rgb(Rng& rng, Index w, Index h) {
  Image8 img(w, h, 3);
  for (auto& x : img.data) x = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

Image8 random_labels(Rng& rng, Index w, Index h, Index classes, bool with_ignore) {
  Image8 img(w, h, 1);
  for (auto& x : img.data) {
    x = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(classes)));
    if (with_ignore && rng.below(10) == 0) x = kIgnoreId;
  }
  return img;
}

int max_abs_diff(const Image8& a, const Image8& b, Index y, Index x) {
  int m = 0;
  for (Index c = 0; c < 3; ++c) m = std::max(m, std::abs(int(a.at(y, x, c)) - int(b.at(y, x, c))));
  return m;
}

Verdict metric_oracles() {
  Verdict v;
  Rng rng(5150);
  SyntheticDomainSpec spec;
  spec.class_palette = default_palette(3, 1);
  spec.class_histogram = {0.2, 0.2, 0.2};
  spec.shape_family = {ShapeFamily::Disc, ShapeFamily::Square, ShapeFamily::Triangle};
  spec.image_size = 16;
  const auto pal = spec.rendered_palette();

  for (int inst = 0; inst < 50; ++inst) {
    const std::string tag = "instance " + std::to_string(inst);
    const Index w = 1 + static_cast<Index>(rng.below(16)), h = 1 + static_cast<Index>(rng.below(16));
    const Index px = w * h;
    const auto p = random_rgb(rng, w, h), t = random_rgb(rng, w, h);

    for (double delta : {1.0, 3.0, 30.0, 50.0, 127.5, 256.0}) {
      Index hits = 0;
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) hits += max_abs_diff(p, t, y, x) < delta;
      v.require(std::abs(acc_delta(p, t, delta) - double(hits) / double(px)) <= 1e-9, tag + " Acc(" + fmt(delta) + ")");
    }

    double dist = 0;
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        double e = 0;
        for (Index c = 0; c < 3; ++c) e += std::pow(double(p.at(y, x, c)) - double(t.at(y, x, c)), 2);
        dist += std::sqrt(e);
      }
    v.require(std::abs(dist_l2(p, t) - dist / double(px)) <= 1e-9, tag + " Dist");

    // Segmentation: counts exactly, scores within 1e-9.
    const Index C = 2 + static_cast<Index>(rng.below(4));
    const auto truth = random_labels(rng, w, h, C, true), pred = random_labels(rng, w, h, C, false);
    std::vector<std::vector<std::int64_t>> cnt(static_cast<size_t>(C), std::vector<std::int64_t>(static_cast<size_t>(C)));
    std::int64_t total = 0;
    for (size_t i = 0; i < truth.data.size(); ++i) {
      if (truth.data[i] == kIgnoreId) continue;
      ++cnt[truth.data[i]][pred.data[i]];
      ++total;
    }
    if (total == 0) continue;
    ConfusionMatrix cm(C);
    cm.add(truth, pred);
    bool same = true;
    for (Index r = 0; r < C; ++r)
      for (Index c = 0; c < C; ++c) same &= cm.counts(r, c) == cnt[static_cast<size_t>(r)][static_cast<size_t>(c)];
    v.require(same, tag + " confusion counts");
    double diag = 0, recall = 0, iou = 0;
    int present = 0, union_nonzero = 0;
    for (Index k = 0; k < C; ++k) {
      std::int64_t row = 0, col = 0;
      for (Index j = 0; j < C; ++j) {
        row += cnt[static_cast<size_t>(k)][static_cast<size_t>(j)];
        col += cnt[static_cast<size_t>(j)][static_cast<size_t>(k)];
      }
      const double tp = double(cnt[static_cast<size_t>(k)][static_cast<size_t>(k)]);
      diag += tp;
      if (row > 0) recall += tp / double(row), ++present;
      if (row + col > 0) iou += tp / double(row + col - std::int64_t(tp)), ++union_nonzero;
    }
    const auto s = segmentation_metrics(cm);
    v.require(std::abs(s.pixel_accuracy - diag / double(total)) <= 1e-9, tag + " pxAcc");
    v.require(std::abs(s.class_accuracy - recall / present) <= 1e-9, tag + " clsAcc");
    v.require(std::abs(s.mean_iou - iou / union_nonzero) <= 1e-9, tag + " mIoU");

    // Flip rate: nearest rendered color (background included) under max-channel distance.
    const auto mask = random_labels(rng, w, h, 4, true);
    std::int64_t fg = 0, flipped = 0;
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        const int lab = mask.at(y, x);
        if (lab == 0 || lab == kIgnoreId) continue;
        int best = 0, best_d = 1 << 30;
        for (size_t k = 0; k < pal.size(); ++k) {
          int d = 0;
          for (Index c = 0; c < 3; ++c) d = std::max(d, std::abs(int(p.at(y, x, c)) - pal[k][static_cast<size_t>(c)]));
          if (d < best_d) best_d = d, best = static_cast<int>(k);
        }
        ++fg;
        flipped += best != lab;
      }
    const auto fs_ = flip_stats({p}, {mask}, spec);
    v.require(fs_.foreground == fg && fs_.flipped == flipped, tag + " flip counts");
    if (fg > 0)
      v.require(std::abs(flip_rate({p}, {mask}, spec) - double(flipped) / double(fg)) <= 1e-9, tag + " flip_rate");
  }
  if (v.pass) v.detail = "50 random instances up to 16x16: Acc, Dist, pxAcc/clsAcc/mIoU, flip_rate";
  return v;
}

// --- 6: splitter ------------------------------------------------------------------

HistogramVector hv(const std::vector<double>& v) {
  HistogramVector h;
  h.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
  return h;
}

Verdict splitter() {
  Verdict v;
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng data(seed + 77);
    // Centres 1.13 apart; each coordinate jitters by at most 0.02, so points
    // stay within 0.03 of their centre.
    std::vector<HistogramVector> hs;
    std::vector<int> truth;
    const Index n = 20 + static_cast<Index>(seed % 21);
    for (Index i = 0; i < n; ++i) {
      const int b = data.below(2) ? 1 : 0;
      std::vector<double> c{b ? 0.1 : 0.9, b ? 0.9 : 0.1, 0.0, 0.0};
      for (auto& x : c) x += data.uniform(-0.02, 0.02);
      hs.push_back(hv(c));
      truth.push_back(b);
    }
    if (std::count(truth.begin(), truth.end(), 1) == 0 || std::count(truth.begin(), truth.end(), 0) == 0) {
      truth[0] = 1 - truth[0];
      hs[0].values.head(2).reverseInPlace();
    }
    Rng rng(seed);
    const auto plan = kmeans_split(hs, false, rng);
    bool ok = true;
    for (size_t i = 0; i < hs.size(); ++i) ok &= (truth[i] == truth[0]) == (plan.cluster[i] == plan.cluster[0]);
    recovered += ok;
  }
  v.require(recovered == 100, "recovered " + std::to_string(recovered) + "/100");

  for (Index n : {10, 24, 37, 100}) {
    Rng data(static_cast<std::uint64_t>(n));
    std::vector<HistogramVector> hs;
    for (Index i = 0; i < n; ++i) {
      const double a = i < n * 3 / 4 ? data.uniform(0.0, 0.3) : data.uniform(0.7, 1.0);
      hs.push_back(hv({a, 1 - a}));
    }
    Rng rng(1);
    const auto plan = kmeans_split(hs, true, rng);
    const auto na = static_cast<Index>(plan.members(1).size()), nb = static_cast<Index>(plan.members(2).size());
    v.require(na + nb == n && std::abs(na - nb) <= 1 && (n % 2 == 1 || na == nb),
              "balanced split of " + std::to_string(n) + " gave " + std::to_string(na) + "/" + std::to_string(nb));
  }

  for (Index size = 0; size <= 300; size += 7)
    for (double pct : {0.0, 1.0, 10.0, 12.5, 33.0, 50.0, 99.0, 100.0})
      v.require(mixing_count(size, pct) == static_cast<Index>(std::floor(double(size) * pct / 100.0)),
                "mixing_count(" + std::to_string(size) + ", " + fmt(pct) + ")");
  SplitPlan plan;
  for (int i = 0; i < 500; ++i) plan.cluster.push_back(i < 200 ? 1 : 2);
  plan.domain_a = plan.members(1);
  plan.domain_b = plan.members(2);
  Rng rng(3);
  const auto mixed = apply_mixing(plan, 10, rng);
  v.require(mixed.domain_a.size() == 230u && mixed.domain_b.size() == 320u, "mixing 10% of 200/300");
  if (v.pass) v.detail = "blobs recovered 100/100, balanced halves exact, floor mixing formula";
  return v;
}

// --- 7: flip experiment -----------------------------------------------------------

constexpr Index kImages = 200;
constexpr Index kSize = 64;
constexpr Index kEpochs = 40;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

void make_flip_dataset(const fs::path& root) {
  SyntheticDomainSpec a, b;
  a.class_palette = default_palette(3, 0);
  b.class_palette = default_palette(3, 1);
  a.class_histogram = {0.6, 0.3, 0.1};
  b.class_histogram = {0.1, 0.3, 0.6};
  a.shape_family = b.shape_family = {ShapeFamily::Disc, ShapeFamily::Square, ShapeFamily::Triangle};
  a.image_size = b.image_size = kSize;
  Rng rng(2024);
  Rng ra = rng.split(), rb = rng.split();
  write_domain(root, "domainA", synthesize_domain(a, kImages, ra));
  write_domain(root, "domainB", synthesize_domain(b, kImages, rb));
  nlohmann::json m;
  m["seed"] = 2024;
  m["domains"]["domainA"] = {{"spec", spec_to_json(a)}, {"count", kImages}};
  m["domains"]["domainB"] = {{"spec", spec_to_json(b)}, {"count", kImages}};
  write_json(root / "manifest.json", m);
}

TrainConfig flip_config(const fs::path& data, std::uint64_t seed, double beta) {
  TrainConfig cfg;
  cfg.data_root = data.string();
  cfg.total_epochs = kEpochs;
  cfg.seed = seed;
  cfg.beta = beta;
  cfg.perturbation_bound = 0.1;
  // Narrower heads and fewer sampled patches keep the 6 runs inside the CPU budget.
  cfg.head_hidden = 64;
  cfg.head_dim = 64;
  cfg.nce_patches = 64;
  cfg.robust_patches = 64;
  cfg.checkpoint_every = 0;
  cfg.sample_every = 0;
  cfg.validate();
  return cfg;
}

Verdict flip_experiment(const fs::path& work, bool quick) {
  Verdict v;
  const auto t0 = Clock::now();
  fs::create_directories(work);
  const fs::path data = work / "data";
  if (!fs::exists(data / "manifest.json")) make_flip_dataset(data);
  std::ofstream csv(work / "results.csv");
  csv << "seed,beta,flip_rate,pxAcc,mIoU,seconds\n";
  double sum[2] = {0, 0};
  const double betas[2] = {0.0, 1e-4};
  int runs = 0;
  for (std::uint64_t seed : kSeeds) {
    for (int arm = 0; arm < 2; ++arm) {
      TrainConfig cfg = flip_config(data, seed, betas[arm]);
      if (quick) cfg.total_epochs = 1, cfg.max_steps_per_epoch = 5;
      const auto r0 = Clock::now();
      TrainState state = make_state(cfg);
      const TrainData td = load_train_data(cfg);
      const fs::path run = work / ("seed" + std::to_string(seed) + (arm ? "_srunit" : "_backbone"));
      train_run(state, td, run);
      const MetricsReport r = evaluate_state(state, data, EvalOptions{});
      emit_report(r, run / "report.json");
      const double secs = seconds_since(r0);
      sum[arm] += r.metrics.at("flip_rate");
      csv << seed << ',' << betas[arm] << ',' << r.metrics.at("flip_rate") << ',' << r.metrics.at("pxAcc") << ','
          << r.metrics.at("mIoU") << ',' << secs << '\n';
      csv.flush();
      std::cout << "  seed " << seed << (arm ? " srunit  " : " backbone") << " flip_rate "
                << r.metrics.at("flip_rate") << " (" << secs << " s)" << std::endl;
    }
    ++runs;
  }
  const double backbone = sum[0] / runs, robust = sum[1] / runs;
  const double reduction = backbone > 0 ? (backbone - robust) / backbone : 0.0;
  v.detail = "mean flip_rate backbone " + fmt(backbone) + ", srunit " + fmt(robust) + ", relative reduction " +
             fmt(reduction * 100) + "% (need >= 10%), " + fmt(seconds_since(t0) / 60) + " min";
  v.pass = robust < backbone && reduction >= 0.10;
  if (quick) v.detail += " [quick smoke run, not a verdict]";
  return v;
}

// --- 8: schedule ------------------------------------------------------------------

Verdict schedule() {
  Verdict v;
  for (Index total : {400, 200, 40, 20, 8}) {
    TrainConfig c;
    c.total_epochs = total;
    const double t = static_cast<double>(total), gate = t / 4;
    const std::string tag = "total " + std::to_string(total);
    v.require(lr_at(c, 0) == 2e-4, tag + ": lr at epoch 0 is " + fmt(lr_at(c, 0)));
    v.require(lr_at(c, t / 2 - 1e-9) == 2e-4, tag + ": lr before decay");
    v.require(std::abs(lr_at(c, 0.75 * t) - 1e-4) < 1e-15, tag + ": lr halfway through decay");
    v.require(lr_at(c, t) == 0.0, tag + ": lr at final epoch is " + fmt(lr_at(c, t)));
    v.require(!robust_loss_active(c, std::nextafter(gate, 0.0)), tag + ": gate open before total/4");
    v.require(robust_loss_active(c, gate), tag + ": gate closed at total/4");
    v.require(robust_loss_active(c, t - 1), tag + ": gate closed late");
  }
  if (v.pass) v.detail = "lr 2e-4 at 0, linear decay from total/2 to 0 at total; gate opens exactly at total/4";
  return v;
}

// --- 9: determinism and resume ----------------------------------------------------

TrainConfig tiny_config() {
  TrainConfig c;
  c.total_epochs = 200;
  c.ngf = 2;
  c.n_blocks = 1;
  c.head_hidden = 8;
  c.head_dim = 8;
  c.ndf = 2;
  c.nce_patches = 16;
  c.robust_patches = 16;
  c.crop_size = 16;
  c.pool_size = 4;
  c.max_steps_per_epoch = 2;
  c.checkpoint_every = 0;
  c.sample_every = 0;
  c.seed = 11;
  c.robust_gate_fraction = 0.05;  // opens at epoch 10, iteration 20
  c.beta = 1e-3;
  return c;
}

TrainData tiny_data() {
  SyntheticDomainSpec s;
  s.class_palette = default_palette(2, 0);
  s.class_histogram = {0.3, 0.2};
  s.shape_family = {ShapeFamily::Disc, ShapeFamily::Square};
  s.image_size = 16;
  Rng rng(5);
  TrainData d;
  for (const auto& x : synthesize_domain(s, 4, rng)) d.a.push_back(x.image);
  s.class_palette = default_palette(2, 1);
  for (const auto& x : synthesize_domain(s, 4, rng)) d.b.push_back(x.image);
  return d;
}

Verdict determinism(const fs::path& work) {
  Verdict v;
  const auto data = tiny_data();
  const auto cfg = tiny_config();
  auto a = make_state(cfg), b = make_state(cfg);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ra = advance(a, data), rb = advance(b, data);
    v.require(ra.terms.size() == rb.terms.size(), "step " + std::to_string(i) + " term sets differ");
    for (size_t k = 0; k < std::min(ra.terms.size(), rb.terms.size()); ++k) {
      const double d = std::abs(ra.terms[k].second - rb.terms[k].second);
      worst = std::max(worst, d);
      v.require(d <= 1e-6, "step " + std::to_string(i) + " " + ra.terms[k].first);
    }
  }

  fs::create_directories(work);
  auto full = make_state(cfg), part = make_state(cfg);
  std::vector<LossReport> expect;
  for (int i = 0; i < 60; ++i) {
    auto r = advance(full, data);
    if (i >= 15) expect.push_back(r);
  }
  for (int i = 0; i < 15; ++i) advance(part, data);
  save_checkpoint(part, work / "resume.ckpt");
  auto resumed = load_checkpoint(work / "resume.ckpt");
  double worst_rel = 0;
  for (const auto& want : expect) {
    const auto got = advance(resumed, data);
    v.require(got.terms.size() == want.terms.size(), "resumed term sets differ");
    for (size_t k = 0; k < std::min(got.terms.size(), want.terms.size()); ++k) {
      const double rel = std::abs(got.terms[k].second - want.terms[k].second) /
                         std::max(1e-8, std::abs(want.terms[k].second));
      worst_rel = std::max(worst_rel, rel);
      v.require(rel <= 1e-4, "resumed " + got.terms[k].first + " at iteration " + std::to_string(got.iteration));
    }
  }
  if (v.pass)
    v.detail = "100 steps max |diff| " + fmt(worst) + "; resume across the gate, 45 steps, max rel diff " +
               fmt(worst_rel);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  std::set<int> only;
  bool quick = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--work") && i + 1 < argc) {
      work = argv[++i];
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else if (!std::strcmp(argv[i], "--quick")) {
      quick = true;
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--only 1,2,...] [--quick]\n";
      return 2;
    }
  }

  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, gradients},
      {2, closed_forms},
      {3, direct_variant_bound},
      {4, sampler},
      {5, metric_oracles},
      {6, splitter},
      {7, [&] { return flip_experiment(work / "flip", quick); }},
      {8, schedule},
      {9, [&] { return determinism(work / "resume"); }},
  };
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::cout << "criterion " << id << ' ' << (v.pass ? "PASS" : "FAIL") << ": " << v.detail << std::endl;
  }
  return failed ? 1 : 0;
}

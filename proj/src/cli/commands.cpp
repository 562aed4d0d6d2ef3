#include "srunit/cli/commands.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "srunit/cli/manifest.hpp"
#include "srunit/data/split.hpp"
#include "srunit/evaluation/plot.hpp"
#include "srunit/evaluation/report.hpp"

namespace srunit {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::string& category) {
  static const std::map<std::string, int> codes = {
      {"argument", 2},   {"config", 3},   {"io", 4},      {"dimension", 5}, {"generation", 6},
      {"checkpoint", 7}, {"numeric", 8},  {"metric", 9},  {"invariant", 10}, {"index", 11},
  };
  const auto it = codes.find(category);
  return it == codes.end() ? 1 : it->second;
}

namespace {

fs::path output_root() {
  const char* env = std::getenv("SRUNIT_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("srunit-out");
}

struct Context {
  std::vector<std::string> argv;
  std::string manifest_path;
  RunManifest manifest;
};

fs::path default_out(const std::string& out, const std::string& command) {
  return out.empty() ? output_root() / command : fs::path(out);
}

// ---------------------------------------------------------------------------

struct MakeDatasetArgs {
  Index classes = 3;
  std::string hist_a, hist_b, shapes;
  Index n = 200;
  Index size = 64;
  std::uint64_t seed = 0;
  bool same_palette = false;
  std::string out;
};

std::vector<ShapeFamily> parse_shapes(const std::string& s, Index classes) {
  std::vector<ShapeFamily> out;
  if (s.empty()) {
    static const ShapeFamily cycle[4] = {ShapeFamily::Disc, ShapeFamily::Square, ShapeFamily::Triangle,
                                         ShapeFamily::Stripe};
    for (Index c = 0; c < classes; ++c) out.push_back(cycle[c % 4]);
    return out;
  }
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_shape_family(tok));
  if (static_cast<Index>(out.size()) != classes) throw ArgumentError("--shapes needs one entry per class");
  return out;
}

void cmd_make_dataset(const MakeDatasetArgs& a, Context& ctx) {
  const fs::path root = default_out(a.out, "dataset");
  auto hist = [&](const std::string& s, const char* flag) {
    auto h = parse_double_list(s, flag);
    if (static_cast<Index>(h.size()) != a.classes)
      throw ArgumentError(std::string(flag) + " needs " + std::to_string(a.classes) + " values");
    return h;
  };
  SyntheticDomainSpec spec_a, spec_b;
  spec_a.class_palette = default_palette(a.classes, 0);
  spec_b.class_palette = a.same_palette ? spec_a.class_palette : default_palette(a.classes, 1);
  spec_a.class_histogram = hist(a.hist_a, "--hist-a");
  spec_b.class_histogram = hist(a.hist_b, "--hist-b");
  spec_a.shape_family = spec_b.shape_family = parse_shapes(a.shapes, a.classes);
  spec_a.image_size = spec_b.image_size = a.size;
  spec_a.validate();
  spec_b.validate();

  Rng rng(a.seed);
  Rng rng_a = rng.split(), rng_b = rng.split();
  const auto samples_a = synthesize_domain(spec_a, a.n, rng_a);
  const auto samples_b = synthesize_domain(spec_b, a.n, rng_b);
  write_domain(root, "domainA", samples_a);
  write_domain(root, "domainB", samples_b);

  auto realized = [&](const std::vector<SyntheticSample>& s) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(a.classes + 1);
    for (const auto& x : s) acc += class_histogram(x.mask, a.classes + 1).values;
    if (!s.empty()) acc /= static_cast<double>(s.size());
    return std::vector<double>(acc.data(), acc.data() + acc.size());
  };
  json m;
  m["seed"] = a.seed;
  m["layout"] = "<domain>/{images,masks}/<index>.png; mask ids 0 = background, 1..C = classes, 255 = ignore";
  m["domains"]["domainA"] = {{"spec", spec_to_json(spec_a)}, {"count", a.n}, {"realized_histogram", realized(samples_a)}};
  m["domains"]["domainB"] = {{"spec", spec_to_json(spec_b)}, {"count", a.n}, {"realized_histogram", realized(samples_b)}};
  m["split_plans"] = json::array();
  m["mixing_percent"] = nullptr;
  write_json(root / "manifest.json", m);

  ctx.manifest.seed = a.seed;
  ctx.manifest.config = {{"classes", a.classes}, {"hist_a", spec_a.class_histogram}, {"hist_b", spec_b.class_histogram},
                         {"n", a.n}, {"size", a.size}, {"same_palette", a.same_palette}};
  ctx.manifest.outputs = {root.string()};
  std::cout << "wrote " << 2 * a.n << " images to " << root.string() << "\n";
}

// ---------------------------------------------------------------------------

struct SubsampleArgs {
  std::string input;
  std::string features = "auto";
  Index classes = 0;
  bool balanced = false;
  double mix = 0;
  std::uint64_t seed = 0;
  bool materialize = false;
  std::string out;
};

void cmd_subsample(const SubsampleArgs& a, Context& ctx) {
  const fs::path in(a.input);
  const fs::path parent = in.parent_path().empty() ? fs::path(".") : in.parent_path();
  const DomainData dom = load_domain(parent, in.filename().string());
  if (dom.images.size() < 2) throw ArgumentError("subsample needs at least 2 images");
  std::string feat = a.features;
  if (feat == "auto") feat = dom.has_masks() ? "class" : "gray";
  if (feat != "class" && feat != "gray") throw ArgumentError("--features must be auto, class or gray");
  if (feat == "class" && !dom.has_masks()) throw ArgumentError("class histograms need a masks/ directory");

  Index ids = a.classes;
  if (feat == "class" && ids <= 0) {
    int top = 0;
    for (const auto& m : dom.masks)
      for (auto v : m.data)
        if (v != kIgnoreId) top = std::max<int>(top, v);
    ids = top + 1;
  }
  std::vector<HistogramVector> hists;
  for (size_t i = 0; i < dom.images.size(); ++i) {
    HistogramVector h = feat == "class" ? class_histogram(dom.masks[i], ids) : gray_histogram(dom.images[i]);
    h.source_id = dom.files[i];
    hists.push_back(std::move(h));
  }
  Rng rng(a.seed);
  Rng rk = rng.split(), rm = rng.split();
  SplitPlan plan = kmeans_split(hists, a.balanced, rk);
  plan = apply_mixing(plan, a.mix, rm);
  if (plan.degenerate) std::cerr << "warning: " << plan.warning << "\n";

  const fs::path out = default_out(a.out, "subsample");
  fs::create_directories(out);
  auto names = [&](const std::vector<Index>& idx) {
    std::vector<std::string> n;
    for (Index i : idx) n.push_back(dom.files[static_cast<size_t>(i)]);
    return n;
  };
  json j;
  j["input"] = in.string();
  j["features"] = feat;
  j["balanced"] = a.balanced;
  j["mixing_percent"] = a.mix;
  j["seed"] = a.seed;
  j["degenerate"] = plan.degenerate;
  if (!plan.warning.empty()) j["warning"] = plan.warning;
  for (size_t i = 0; i < dom.files.size(); ++i) j["cluster"][dom.files[i]] = plan.cluster[i];
  j["domainA"] = names(plan.domain_a);
  j["domainB"] = names(plan.domain_b);
  write_json(out / "split_plan.json", j);
  for (const auto* dn : {"domainA", "domainB"}) {
    std::ofstream list(out / (std::string(dn) + ".txt"));
    for (const auto& f : j[dn]) list << f.get<std::string>() << "\n";
  }
  if (a.materialize) {
    for (const auto* dn : {"domainA", "domainB"}) {
      fs::create_directories(out / dn / "images");
      if (dom.has_masks()) fs::create_directories(out / dn / "masks");
      for (const auto& f : j[dn]) {
        const std::string name = f.get<std::string>();
        fs::copy_file(in / "images" / name, out / dn / "images" / name, fs::copy_options::overwrite_existing);
        if (dom.has_masks())
          fs::copy_file(in / "masks" / name, out / dn / "masks" / name, fs::copy_options::overwrite_existing);
      }
    }
  }
  ctx.manifest.seed = a.seed;
  ctx.manifest.input_hash = inputs_hash({in});
  ctx.manifest.config = {{"features", feat}, {"balanced", a.balanced}, {"mix", a.mix}, {"classes", ids}};
  ctx.manifest.outputs = {(out / "split_plan.json").string()};
  std::cout << "cluster sizes " << plan.members(1).size() << "/" << plan.members(2).size() << ", domains "
            << plan.domain_a.size() << "/" << plan.domain_b.size() << "\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::string data;
  Index epochs = -1;
  std::string resume;
  bool verbose = false;
};

TrainConfig effective_config(const std::string& file, const std::vector<std::string>& overrides,
                             const std::string& data, Index epochs) {
  KeyValues kv;
  if (!file.empty()) kv = read_key_value_file(file);
  for (const auto& o : overrides) {
    const auto [k, v] = parse_override(o);
    kv[k] = v;
  }
  if (!data.empty()) kv["data_root"] = data;
  if (epochs >= 0) kv["total_epochs"] = std::to_string(epochs);
  return TrainConfig::from_key_values(kv);
}

std::vector<fs::path> config_inputs(const std::string& file, const TrainConfig& cfg) {
  std::vector<fs::path> in;
  if (!file.empty()) in.emplace_back(file);
  if (!cfg.data_root.empty()) in.emplace_back(cfg.data_root);
  return in;
}

fs::path run_training(const TrainConfig& cfg, const fs::path& run_dir, const std::string& resume, bool verbose) {
  TrainState state = make_state(cfg);
  if (!resume.empty()) {
    load_checkpoint_into(resume, state);
    // The schedule length may be extended on resume; everything else is the checkpoint's.
    state.cfg.total_epochs = cfg.total_epochs;
  }
  TrainData data;
  if (state.epoch < state.cfg.total_epochs) data = load_train_data(state.cfg);
  RunOptions opt;
  opt.quiet = !verbose;
  train_run(state, data, run_dir, opt);
  return run_dir / "latest.ckpt";
}

void cmd_train(const TrainArgs& a, Context& ctx) {
  const TrainConfig cfg = effective_config(a.config, a.overrides, a.data, a.epochs);
  const fs::path run_dir = default_out(a.out, "train");
  ctx.manifest.seed = cfg.seed;
  ctx.manifest.config = cfg.to_key_values();
  auto inputs = config_inputs(a.config, cfg);
  if (!a.resume.empty()) inputs.emplace_back(a.resume);
  ctx.manifest.input_hash = inputs_hash(inputs);
  const fs::path ckpt = run_training(cfg, run_dir, a.resume, a.verbose);
  ctx.manifest.outputs = {run_dir.string(), ckpt.string()};
  std::cout << "checkpoint " << ckpt.string() << "\n";
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string checkpoint, data, out;
  std::string deltas = "30,50";
  bool plots = false;
  bool per_image = false;
  Index max_images = -1;
};

void cmd_evaluate(const EvaluateArgs& a, Context& ctx) {
  EvalOptions opt;
  opt.deltas = parse_double_list(a.deltas, "--deltas");
  opt.per_image_acc = a.per_image;
  opt.max_images = a.max_images;
  const MetricsReport r = evaluate_run(a.checkpoint, a.data, opt);
  const fs::path out = a.out.empty() ? output_root() / "report.json" : fs::path(a.out);
  emit_report(r, out, a.plots);
  ctx.manifest.input_hash = inputs_hash({a.checkpoint, a.data});
  ctx.manifest.config = r.config;
  ctx.manifest.outputs = {out.string()};
  for (const auto& [k, v] : r.metrics) std::cout << k << " " << v << "\n";
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::string modes = "none,E1,E2,E3,eq4,E5,E6";
  std::string config;
  std::vector<std::string> overrides;
  std::string data, out;
  Index epochs = -1;
  std::string deltas = "30,50";
  bool verbose = false;
};

void cmd_ablate(const AblateArgs& a, Context& ctx) {
  const TrainConfig base = effective_config(a.config, a.overrides, a.data, a.epochs);
  const fs::path root = default_out(a.out, "ablate");
  fs::create_directories(root);
  std::vector<std::string> modes;
  {
    std::stringstream ss(a.modes);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) modes.push_back(to_string(parse_ablation_mode(tok)));
  }
  if (modes.empty()) throw ArgumentError("--modes is empty");

  EvalOptions eo;
  eo.deltas = parse_double_list(a.deltas, "--deltas");
  const bool can_eval = !base.data_root.empty() && manifest_spec(base.data_root, eo.target_domain).has_value();

  std::vector<std::string> metric_cols = {"pxAcc", "clsAcc", "mIoU", "Dist"};
  for (double d : eo.deltas) {
    std::ostringstream os;
    os << "acc_" << d;
    metric_cols.push_back(os.str());
  }
  metric_cols.push_back("flip_rate");
  std::ofstream csv(root / "comparison.csv");
  csv << "mode";
  for (const auto& c : metric_cols) csv << ',' << c;
  csv << ",run_dir\n";

  ctx.manifest.outputs.push_back((root / "comparison.csv").string());
  for (const auto& mode : modes) {
    TrainConfig cfg = base;
    cfg.ablation_mode = parse_ablation_mode(mode);
    const fs::path run_dir = root / mode;
    const fs::path ckpt = run_training(cfg, run_dir, "", a.verbose);
    csv << mode;
    if (can_eval) {
      const MetricsReport r = evaluate_run(ckpt, base.data_root, eo);
      emit_report(r, run_dir / "report.json");
      for (const auto& c : metric_cols) {
        csv << ',';
        if (r.metrics.count(c)) csv << r.metrics.at(c);
      }
    } else {
      for (size_t i = 0; i < metric_cols.size(); ++i) csv << ',';
    }
    csv << ',' << run_dir.string() << '\n';
    ctx.manifest.outputs.push_back(run_dir.string());
    std::cout << "finished " << mode << "\n";
  }
  ctx.manifest.seed = base.seed;
  ctx.manifest.config = base.to_key_values();
  ctx.manifest.config["modes"] = a.modes;
  ctx.manifest.input_hash = inputs_hash(config_inputs(a.config, base));
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string run;
  std::vector<std::string> reports;
  std::string out;
};

void cmd_report(const ReportArgs& a, Context& ctx) {
  if (a.run.empty() && a.reports.empty()) throw ArgumentError("report needs --run and/or --reports");
  const fs::path out = a.out.empty() ? (a.run.empty() ? output_root() / "report" : fs::path(a.run)) : fs::path(a.out);
  fs::create_directories(out);
  json summary;
  std::vector<fs::path> inputs;
  if (!a.run.empty()) {
    const fs::path csv = fs::path(a.run) / "losses.csv";
    inputs.push_back(csv);
    auto series = read_csv_series(csv.string(), {"epoch", "iteration", "lr", "gate"});
    write_png((out / "loss_curves.png").string(), line_plot(series));
    ctx.manifest.outputs.push_back((out / "loss_curves.png").string());
    for (const auto& s : series) {
      double tail = 0;
      const size_t n = std::min<size_t>(s.y.size(), 50);
      for (size_t i = s.y.size() - n; i < s.y.size(); ++i) tail += s.y[i];
      summary["final_losses"][s.name] = n ? tail / static_cast<double>(n) : 0.0;
    }
    const fs::path rep = fs::path(a.run) / "report.json";
    if (fs::exists(rep)) {
      summary["metrics"] = read_json(rep).at("metrics");
      inputs.push_back(rep);
    }
  }
  if (!a.reports.empty()) {
    std::ofstream table(out / "reports.csv");
    std::vector<std::string> keys;
    std::vector<json> loaded;
    for (const auto& r : a.reports) {
      loaded.push_back(read_json(r));
      inputs.emplace_back(r);
      for (const auto& [k, v] : loaded.back().at("metrics").items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    table << "report";
    for (const auto& k : keys) table << ',' << k;
    table << '\n';
    for (size_t i = 0; i < loaded.size(); ++i) {
      table << a.reports[i];
      for (const auto& k : keys) {
        table << ',';
        if (loaded[i]["metrics"].contains(k)) table << loaded[i]["metrics"][k].get<double>();
      }
      table << '\n';
      std::vector<std::pair<std::string, double>> bars;
      for (const auto& [k, v] : loaded[i]["metrics"].items())
        if (k != "Dist") bars.emplace_back(k, v.get<double>());
      const fs::path png = out / ("metrics_" + std::to_string(i) + ".png");
      write_png(png.string(), bar_plot(bars));
      ctx.manifest.outputs.push_back(png.string());
    }
    ctx.manifest.outputs.push_back((out / "reports.csv").string());
  }
  write_json(out / "summary.json", summary);
  ctx.manifest.outputs.push_back((out / "summary.json").string());
  ctx.manifest.input_hash = inputs_hash(inputs);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"srunit: semantically robust unpaired image translation at toy scale"};
  app.require_subcommand(1);
  Context ctx;
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);
  app.add_option("--manifest", ctx.manifest_path, "runs.jsonl to append to (default $SRUNIT_OUTPUT_ROOT/runs.jsonl)");

  MakeDatasetArgs md;
  auto* c_md = app.add_subcommand("make-dataset", "synthesize a two-domain shapes dataset");
  c_md->add_option("--classes", md.classes, "number of classes")->check(CLI::Range(1, 8));
  c_md->add_option("--hist-a", md.hist_a, "per-class pixel fractions of domain A")->required();
  c_md->add_option("--hist-b", md.hist_b, "per-class pixel fractions of domain B")->required();
  c_md->add_option("--n", md.n, "images per domain")->check(CLI::NonNegativeNumber);
  c_md->add_option("--size", md.size, "image side in pixels");
  c_md->add_option("--seed", md.seed);
  c_md->add_option("--shapes", md.shapes, "per-class shape: disc,square,triangle,stripe");
  c_md->add_flag("--same-palette", md.same_palette, "use domain A's colors in domain B");
  c_md->add_option("--out", md.out, "dataset root");

  SubsampleArgs ss;
  auto* c_ss = app.add_subcommand("subsample", "split a domain directory into two by K-means on histograms");
  c_ss->add_option("--input", ss.input, "directory with images/ (and optionally masks/)")->required();
  c_ss->add_option("--features", ss.features, "auto, class or gray");
  c_ss->add_option("--classes", ss.classes, "label count for class histograms (default: max label + 1)");
  c_ss->add_flag("--balanced", ss.balanced);
  c_ss->add_option("--mix", ss.mix, "percent of the opposite cluster added to each domain")->check(CLI::Range(0.0, 100.0));
  c_ss->add_option("--seed", ss.seed);
  c_ss->add_flag("--materialize", ss.materialize, "copy the split into <out>/{domainA,domainB}");
  c_ss->add_option("--out", ss.out);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "train a translation model");
  c_tr->add_option("--config", tr.config, "key = value config file");
  c_tr->add_option("--override", tr.overrides, "key=value, repeatable");
  c_tr->add_option("--out", tr.out, "run directory");
  c_tr->add_option("--data", tr.data, "dataset root (sets data_root)");
  c_tr->add_option("--epochs", tr.epochs, "sets total_epochs");
  c_tr->add_option("--resume", tr.resume, "checkpoint to continue from");
  c_tr->add_flag("--verbose", tr.verbose);

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  c_ev->add_option("--checkpoint", ev.checkpoint)->required();
  c_ev->add_option("--data", ev.data)->required();
  c_ev->add_option("--deltas", ev.deltas, "Acc thresholds, comma separated");
  c_ev->add_option("--out", ev.out, "report JSON path");
  c_ev->add_option("--max-images", ev.max_images);
  c_ev->add_flag("--plots", ev.plots);
  c_ev->add_flag("--per-image", ev.per_image, "average Acc per image instead of pooling pixels");

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "train and evaluate one run per ablation mode");
  c_ab->add_option("--modes", ab.modes, "comma list of none,E1,E2,E3,eq4,E5,E6");
  c_ab->add_option("--config", ab.config);
  c_ab->add_option("--override", ab.overrides);
  c_ab->add_option("--data", ab.data);
  c_ab->add_option("--epochs", ab.epochs);
  c_ab->add_option("--deltas", ab.deltas);
  c_ab->add_option("--out", ab.out);
  c_ab->add_flag("--verbose", ab.verbose);

  ReportArgs rp;
  auto* c_rp = app.add_subcommand("report", "plot loss curves and tabulate reports");
  c_rp->add_option("--run", rp.run, "run directory with losses.csv");
  c_rp->add_option("--reports", rp.reports, "report JSON files");
  c_rp->add_option("--out", rp.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: argument: " << e.what() << "\n";
    return exit_code_for("argument");
  }

  const auto* sub = app.get_subcommands().front();
  ctx.manifest.command = sub->get_name();
  ctx.manifest.argv = ctx.argv;
  const auto t0 = std::chrono::steady_clock::now();
  int code = 0;
  try {
    if (sub == c_md) cmd_make_dataset(md, ctx);
    else if (sub == c_ss) cmd_subsample(ss, ctx);
    else if (sub == c_tr) cmd_train(tr, ctx);
    else if (sub == c_ev) cmd_evaluate(ev, ctx);
    else if (sub == c_ab) cmd_ablate(ab, ctx);
    else if (sub == c_rp) cmd_report(rp, ctx);
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    ctx.manifest.status = e.category();
    ctx.manifest.error = e.what();
    code = exit_code_for(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    ctx.manifest.status = "io";
    ctx.manifest.error = e.what();
    code = exit_code_for("io");
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    ctx.manifest.status = "internal";
    ctx.manifest.error = e.what();
    code = 1;
  }
  ctx.manifest.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    append_manifest(ctx.manifest_path.empty() ? output_root() / "runs.jsonl" : fs::path(ctx.manifest_path),
                    ctx.manifest);
  } catch (const Error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    if (code == 0) code = exit_code_for("io");
  }
  return code;
}

}  // namespace srunit

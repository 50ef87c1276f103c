#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli_support.hpp"
#include "ispw/ablate.hpp"
#include "ispw/events.hpp"
#include "ispw/imagecore.hpp"
#include "ispw/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ispw::cli {
namespace {

std::string make_out_dir(const std::string& dir) {
  require_flag(dir, "--out-dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

// ---- Options shared by train and ablate ----

struct TrainFlags {
  std::uint64_t seed = 1;
  std::size_t steps = 0, batch = 0, crop = 0, log_every = 0, checkpoint_every = 0;
  double lr = 0.0;
  std::string variant, align;
  int bins = 0;
  bool toy = false;
  CLI::App* app = nullptr;

  void add_to(CLI::App* a, bool with_toy) {
    app = a;
    a->add_option("--seed", seed, "Random seed")->capture_default_str();
    a->add_option("--steps", steps, "Optimizer steps");
    a->add_option("--batch", batch, "Batch size");
    a->add_option("--crop", crop, "RAW crop side (even; 0 = whole image)");
    a->add_option("--lr", lr, "Adam learning rate");
    a->add_option("--variant", variant,
                  "Color source: linear3x3, const_val, affine_indep, affine_dep, color_blur or no_color_pred");
    a->add_option("--align", align, "Loss alignment: no_align, aligned_loss or mask");
    a->add_option("--bins", bins, "Color-map bins per channel");
    a->add_option("--log-every", log_every, "Emit a step event every N steps (0 = never)");
    a->add_option("--checkpoint-every", checkpoint_every, "Checkpoint every N steps (0 = only at the end)");
    if (with_toy) a->add_flag("--toy", toy, "Start from the small network sizes used by the ablation");
  }

  bool given(const std::string& name) const { return app->get_option("--" + name)->count() > 0; }

  train::TrainConfig build(train::TrainConfig base, const json& config, std::size_t threads) const {
    if (config.contains("train")) base = train::config_from_json(config.at("train"), base);
    if (given("seed")) base.seed = seed;
    if (given("steps")) base.steps = steps;
    if (given("batch")) base.batch = batch;
    if (given("crop")) base.crop = crop;
    if (given("lr")) base.adam.lr = lr;
    if (given("variant")) base.color_variant = variant;
    if (given("align")) base.align = train::parse_align(align);
    if (given("bins")) base.bins = bins;
    if (given("log-every")) base.log_every = log_every;
    if (given("checkpoint-every")) base.checkpoint_every = checkpoint_every;
    base.threads = threads;
    base.validate();
    return base;
  }
};

/// Tees events to stderr and a JSON-lines file.
class LogFile {
 public:
  explicit LogFile(const std::string& path) : out_(path), sink_([this](const json& e) {
    const std::string line = e.dump(-1, ' ', false, json::error_handler_t::replace);
    std::cerr << line << "\n";
    out_ << line << "\n" << std::flush;
  }) {
    if (!out_) throw IoError("cannot write '" + path + "'");
  }

 private:
  std::ofstream out_;
  events::ScopedSink sink_;
};

// ---- Commands ----

struct Globals {
  std::size_t threads = 1;
  std::string config_path;
  json config = json::object();
};

struct PreprocessCmd {
  std::string raw, checkpoint, out_dir;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("preprocess", "Write the RAW visualization x' (and x~ with --checkpoint)");
    c->add_option("--raw", raw, "RAW input (.raw4)");
    c->add_option("--checkpoint", checkpoint, "Train state holding the pre-processing network");
    c->add_option("-o,--out-dir", out_dir, "Output directory (xprime.ppm, xtilde.ppm)");
  }

  json run() const {
    const RawImage x = read_raw4(require_flag(raw, "--raw"));
    const std::string dir = make_out_dir(out_dir);
    const RgbImage xp = gamma_process(x);
    write_ppm(in_dir(dir, "xprime.ppm"), xp);
    json written = {"xprime.ppm"};
    if (!checkpoint.empty()) {
      const auto st = train::load_state(checkpoint);
      if (!st.has_preprocess()) throw StateError("checkpoint '" + checkpoint + "' has no pre-processing network");
      write_ppm(in_dir(dir, "xtilde.ppm"),
                clamped(preprocess_forward(xp, make_coord_map(x.height(), x.width()), st.params, st.cfg.pre, "pre.")));
      written.push_back("xtilde.ppm");
    }
    return {{"command", "preprocess"}, {"out_dir", dir}, {"written", written}};
  }
};

struct ColormapCmd {
  CLI::App* fit_app = nullptr;
  CLI::App* apply_app = nullptr;
  CLI::App* bench_app = nullptr;
  std::string xt, c, mask, model, out, variant = "affine_dep";
  int bins = 15;
  double temperature = 0.0;
  std::size_t pairs = 50, size = 16;
  std::uint64_t seed = 1;

  void add(CLI::App& root) {
    auto* cm = root.add_subcommand("colormap", "Fit, apply or benchmark the local color map");
    cm->require_subcommand(1);
    fit_app = cm->add_subcommand("fit", "Fit a color map from x~ to c and save it as JSON");
    fit_app->add_option("--xt", xt, "Source image x~ (.ppm)");
    fit_app->add_option("--c", c, "Target low-resolution color image (.ppm)");
    fit_app->add_option("--mask", mask, "Optional pixel mask (.pgm)");
    fit_app->add_option("--variant", variant, "linear3x3, const_val, affine_indep, affine_dep or color_blur")
        ->capture_default_str();
    fit_app->add_option("--bins", bins, "Bins per channel")->capture_default_str();
    fit_app->add_option("--temperature", temperature, "Softmax temperature (0 = 1/B^2)")->capture_default_str();
    fit_app->add_option("-o,--out", out, "Model JSON output");

    apply_app = cm->add_subcommand("apply", "Apply a saved color map to x~");
    apply_app->add_option("--xt", xt, "Source image x~ (.ppm)");
    apply_app->add_option("--model", model, "Model JSON from `colormap fit`");
    apply_app->add_option("-o,--out", out, "Output image (.ppm)");

    bench_app = cm->add_subcommand("bench", "Fit every variant on synthetic pairs and report residuals and timings");
    bench_app->add_option("--pairs", pairs, "Number of pairs")->capture_default_str();
    bench_app->add_option("--size", size, "Image side")->capture_default_str();
    bench_app->add_option("--bins", bins, "Bins per channel")->capture_default_str();
    bench_app->add_option("--seed", seed, "Random seed")->capture_default_str();
    bench_app->add_option("-o,--out", out, "Optional JSON report path");
  }

  ColorMapOptions options() const {
    ColorMapOptions o;
    o.variant = parse_variant(variant);
    o.bins = bins;
    o.temperature = temperature;
    return o;
  }

  json run() const {
    if (fit_app->parsed()) {
      const RgbImage x = read_ppm(require_flag(xt, "--xt"));
      const RgbImage target = read_ppm(require_flag(c, "--c"));
      std::optional<MaskImage> m;
      if (!mask.empty()) m = read_pgm_mask(mask);
      const ColorMapModel fitted = fit(x, target, options(), m ? &*m : nullptr);
      save_model(require_flag(out, "--out"), fitted);
      return {{"command", "colormap fit"},
              {"variant", variant_name(fitted.variant)},
              {"residual_l1", fit_residual_l1(x, target, fitted)},
              {"out", out}};
    }
    if (apply_app->parsed()) {
      const RgbImage x = read_ppm(require_flag(xt, "--xt"));
      const ColorMapModel mdl = load_model(require_flag(model, "--model"));
      write_ppm(require_flag(out, "--out"), clamped(apply(x, mdl)));
      return {{"command", "colormap apply"}, {"out", out}};
    }
    return bench();
  }

  json bench() const {
    if (pairs == 0 || size < 2 || size % 2 != 0) throw ParameterError("bench needs pairs > 0 and an even size >= 2");
    SynthConfig sc;
    sc.height = size;
    sc.width = size;
    const std::vector<ColorMapVariant> variants{ColorMapVariant::Linear3x3, ColorMapVariant::ConstVal,
                                                ColorMapVariant::AffineIndep, ColorMapVariant::AffineDep,
                                                ColorMapVariant::ColorBlur};
    std::vector<double> residual(variants.size()), millis(variants.size());
    std::size_t violations = 0;
    for (std::size_t i = 0; i < pairs; ++i) {
      const SynthSample s = synth_sample(i, seed, sc, false);
      const RgbImage xp = gamma_process(s.raw);
      const RgbImage target = downsample_bilinear_2x(s.target_aligned);
      std::vector<double> r(variants.size());
      for (std::size_t v = 0; v < variants.size(); ++v) {
        ColorMapOptions o;
        o.variant = variants[v];
        o.bins = bins;
        const auto t0 = std::chrono::steady_clock::now();
        const ColorMapModel mdl = fit(xp, target, o);
        millis[v] += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        r[v] = fit_residual_l1(xp, target, mdl);
        residual[v] += r[v];
      }
      const double slack = 1e-6 * double(xp.pixels());
      if (!(r[1] + slack >= r[2] && r[2] + slack >= r[3])) ++violations;
    }
    json rows = json::array();
    for (std::size_t v = 0; v < variants.size(); ++v) {
      rows.push_back({{"variant", variant_name(variants[v])},
                      {"mean_residual", residual[v] / double(pairs)},
                      {"mean_fit_ms", millis[v] / double(pairs)}});
    }
    json report = {{"command", "colormap bench"},
                   {"pairs", pairs},
                   {"size", size},
                   {"bins", bins},
                   {"variants", rows},
                   {"nested_ordering_violations", violations}};
    if (!out.empty()) {
      std::ofstream f(out);
      if (!f) throw IoError("cannot write '" + out + "'");
      f << report.dump(2) << "\n";
    }
    return report;
  }
};

struct FlowmaskCmd {
  std::string fwd, bwd, out_dir;
  FbMaskOptions opt;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("flowmask", "Forward-backward consistency mask from two .flo files");
    c->add_option("--fwd", fwd, "Forward flow (.flo)");
    c->add_option("--bwd", bwd, "Backward flow (.flo)");
    c->add_option("--alpha1", opt.alpha1, "Relative tolerance")->capture_default_str();
    c->add_option("--alpha2", opt.alpha2, "Absolute tolerance (pixels^2)")->capture_default_str();
    c->add_flag("--displaced", opt.displaced, "Sample the backward flow at p + fwd(p)");
    c->add_option("-o,--out-dir", out_dir, "Output directory (mask.pgm)");
  }

  json run() const {
    const FlowField f = read_flo(require_flag(fwd, "--fwd"));
    const FlowField b = read_flo(require_flag(bwd, "--bwd"));
    const MaskImage m = fb_mask(f, b, opt);
    const std::string dir = make_out_dir(out_dir);
    write_pgm_mask(in_dir(dir, "mask.pgm"), m);
    double kept = 0.0;
    for (float v : m.values()) kept += v;
    return {{"command", "flowmask"}, {"out_dir", dir}, {"kept_fraction", kept / double(m.pixels())}};
  }
};

struct WarpCmd {
  std::string image, flow, out;
  bool upsample = false;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("warp", "Backward-warp an image by a flow: out(p) = img(p + flow(p))");
    c->add_option("--image", image, "Input image (.ppm)");
    c->add_option("--flow", flow, "Flow (.flo)");
    c->add_flag("--upsample-flow", upsample, "Treat the flow as half resolution and upsample it 2x");
    c->add_option("-o,--out", out, "Output image (.ppm)");
  }

  json run() const {
    const RgbImage img = read_ppm(require_flag(image, "--image"));
    FlowField f = read_flo(require_flag(flow, "--flow"));
    if (upsample) f = upsample_flow_2x(f);
    write_ppm(require_flag(out, "--out"), clamped(warp(img, f)));
    return {{"command", "warp"}, {"out", out}};
  }
};

struct SynthCmd {
  std::size_t n = 8;
  std::uint64_t seed = 1;
  std::string out_dir;
  SynthConfig cfg;
  bool no_misalign = false;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("synth", "Generate a synthetic misaligned RAW/sRGB dataset with a manifest");
    c->add_option("--n", n, "Number of pairs")->capture_default_str();
    c->add_option("--seed", seed, "Random seed")->capture_default_str();
    c->add_option("--height", cfg.height, "RAW height")->capture_default_str();
    c->add_option("--width", cfg.width, "RAW width")->capture_default_str();
    c->add_option("--test-count", cfg.test_count, "Pairs assigned to the test split")->capture_default_str();
    c->add_option("--occluders", cfg.occluders, "Occluders per training target")->capture_default_str();
    c->add_flag("--no-misalign", no_misalign, "Keep targets aligned with the RAW");
    c->add_flag("--identity-color", cfg.identity_color, "Use the identity color transform");
    c->add_option("-o,--out-dir", out_dir, "Output directory");
  }

  json run() {
    cfg.misalign = !no_misalign;
    if (n == 0) throw ParameterError("--n must be positive");
    const std::string dir = make_out_dir(out_dir);
    const Manifest m = synth_dataset(n, seed, cfg, dir);
    return {{"command", "synth"},
            {"out_dir", dir},
            {"manifest", in_dir(dir, "manifest.json")},
            {"count", m.entries.size()}};
  }
};

struct CropsCmd {
  std::string raw, target, pairs, flow_fwd, flow_bwd, out_dir, capture = "capture", split = "train";
  std::size_t crop = 320, stride = 160;
  double threshold = 0.5;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("crops", "Cut an aligned capture into sliding crops and filter them by NCC");
    c->add_option("--raw", raw, "RAW capture (.raw4)");
    c->add_option("--target", target, "Full-resolution target (.ppm), twice the RAW size");
    c->add_option("--pairs", pairs, "Point pairs JSON [[x1,y1,x2,y2],...] mapping target to the RAW frame");
    c->add_option("--flow-fwd", flow_fwd, "RAW-resolution forward flow of the whole capture (.flo)");
    c->add_option("--flow-bwd", flow_bwd, "RAW-resolution backward flow of the whole capture (.flo)");
    c->add_option("--crop", crop, "RAW crop side")->capture_default_str();
    c->add_option("--stride", stride, "RAW stride")->capture_default_str();
    c->add_option("--threshold", threshold, "Minimum NCC kept")->capture_default_str();
    c->add_option("--capture", capture, "Capture id prefix")->capture_default_str();
    c->add_option("--split", split, "Split of every crop (train, val or test)")->capture_default_str();
    c->add_option("-o,--out-dir", out_dir, "Output directory (crops and manifest.json)");
  }

  json run() const {
    const RawImage x = read_raw4(require_flag(raw, "--raw"));
    RgbImage y = read_ppm(require_flag(target, "--target"));
    if (y.height() != 2 * x.height() || y.width() != 2 * x.width()) {
      throw DimensionError("target must be twice the RAW size");
    }
    if (!pairs.empty()) y = warp_homography(y, homography_dlt(read_point_pairs(pairs)));
    if (flow_fwd.empty() != flow_bwd.empty()) throw ParameterError("--flow-fwd and --flow-bwd go together");
    std::optional<FlowField> ff, fb;
    if (!flow_fwd.empty()) {
      ff = read_flo(flow_fwd);
      fb = read_flo(flow_bwd);
      require_same_dims(*ff, x, "forward flow");
      require_same_dims(*fb, x, "backward flow");
    }
    const std::string dir = make_out_dir(out_dir);
    Manifest m;
    m.root = dir;
    for (const CropOrigin& o : sliding_crops(x.height(), x.width(), crop, stride)) {
      ManifestEntry e;
      e.id = capture + "_" + std::to_string(o.row) + "_" + std::to_string(o.col);
      e.split = split;
      e.capture = capture;
      const RawImage xr = ispw::crop(x, o.row, o.col, crop, crop);
      const RgbImage yr = ispw::crop(y, 2 * o.row, 2 * o.col, 2 * crop, 2 * crop);
      e.raw = e.id + ".raw4";
      e.target = e.id + ".ppm";
      write_raw4(in_dir(dir, e.raw), xr);
      write_ppm(in_dir(dir, e.target), yr);
      if (ff) {
        e.flow_fwd = e.id + ".fwd.flo";
        e.flow_bwd = e.id + ".bwd.flo";
        write_flo(in_dir(dir, e.flow_fwd), ispw::crop(*ff, o.row, o.col, crop, crop));
        write_flo(in_dir(dir, e.flow_bwd), ispw::crop(*fb, o.row, o.col, crop, crop));
      }
      e.ncc = pair_ncc(xr, yr);
      m.entries.push_back(std::move(e));
    }
    const Manifest kept = filter_pairs(m, threshold);
    save_manifest(in_dir(dir, "manifest.json"), kept);
    return {{"command", "crops"},
            {"out_dir", dir},
            {"crops", m.entries.size()},
            {"kept", kept.entries.size()},
            {"rejected", kept.rejected}};
  }
};

struct TrainCmd {
  CLI::App* app = nullptr;
  std::string mode, manifest, split = "train", out_dir, resume;
  TrainFlags flags;

  void add(CLI::App& root) {
    app = root.add_subcommand("train", "Train P+F (isp), G (color) or all three (joint)");
    app->add_option("mode", mode, "isp, color or joint")->check(CLI::IsMember({"isp", "color", "joint"}));
    app->add_option("--manifest", manifest, "Dataset manifest.json");
    app->add_option("--split", split, "Manifest split used for training")->capture_default_str();
    app->add_option("-o,--out-dir", out_dir, "Output directory (state.ckpt, state.ckpt.json, train.log.jsonl)");
    app->add_option("--resume", resume, "Continue from a saved train state");
    flags.add_to(app, true);
  }

  json run(const Globals& g) const {
    require_flag(mode, "mode (isp, color or joint)");
    const std::string dir = make_out_dir(out_dir);
    LogFile log(in_dir(dir, "train.log.jsonl"));
    const Manifest m = load_manifest(require_flag(manifest, "--manifest"));
    train::TrainState st;
    if (!resume.empty()) {
      st = train::load_state(resume);
      if (train::mode_name(st.mode) != mode) throw ParameterError("--resume state was trained in another mode");
      const std::uint64_t done = st.adam.step;
      train::TrainConfig cfg = flags.build(st.cfg, g.config, g.threads);
      if (done > cfg.steps) throw ParameterError("--steps is below the resumed step count");
      st.cfg = cfg;
    } else {
      const train::TrainConfig base = flags.toy ? train::toy_config() : train::TrainConfig{};
      st = train::init_state(flags.build(base, g.config, g.threads), train::parse_mode(mode));
    }
    const auto data = train::prepare_split(m, split, st.cfg.align, st.cfg.mask);
    train::TrainOptions opt;
    opt.checkpoint_path = in_dir(dir, "state.ckpt");
    const auto reports = train::run_training(st, data, opt);
    const double last = reports.empty() ? 0.0 : reports.back().loss;
    return {{"command", "train"}, {"mode", mode}, {"steps", st.adam.step}, {"final_loss", last},
            {"checkpoint", opt.checkpoint_path}};
  }
};

struct InferCmd {
  std::string raw, checkpoint, color_checkpoint, color_image, out_dir;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("infer", "Run x -> P -> G -> color map -> F and write every intermediate");
    c->add_option("--raw", raw, "RAW input (.raw4)");
    c->add_option("--checkpoint", checkpoint, "Train state holding F (and P, G when trained jointly)");
    c->add_option("--color-checkpoint", color_checkpoint, "Train state holding G");
    c->add_option("--color-image", color_image, "Low-resolution color image used instead of G (.ppm)");
    c->add_option("-o,--out-dir", out_dir, "Output directory (xprime, xtilde, c, chat, yhat .ppm)");
  }

  json run() const {
    const RawImage x = read_raw4(require_flag(raw, "--raw"));
    const auto isp = train::load_state(require_flag(checkpoint, "--checkpoint"));
    std::optional<train::TrainState> color;
    if (!color_checkpoint.empty()) color = train::load_state(color_checkpoint);
    std::optional<RgbImage> cimg;
    if (!color_image.empty()) cimg = read_ppm(color_image);
    const auto r = train::infer(x, isp, color ? &*color : nullptr, cimg ? &*cimg : nullptr);
    const std::string dir = make_out_dir(out_dir);
    write_ppm(in_dir(dir, "xprime.ppm"), clamped(r.xprime));
    write_ppm(in_dir(dir, "xtilde.ppm"), clamped(r.xtilde));
    write_ppm(in_dir(dir, "c.ppm"), clamped(r.c));
    write_ppm(in_dir(dir, "chat.ppm"), clamped(r.chat));
    write_ppm(in_dir(dir, "yhat.ppm"), clamped(r.yhat));
    return {{"command", "infer"},
            {"out_dir", dir},
            {"height", r.yhat.height()},
            {"width", r.yhat.width()},
            {"written", {"xprime.ppm", "xtilde.ppm", "c.ppm", "chat.ppm", "yhat.ppm"}}};
  }
};

struct EvalCmd {
  std::string pred, gt, flow, checkpoint, manifest, split = "test", out;
  bool aligned = false;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand(
        "eval", "PSNR/SSIM of a prediction against a flow-aligned target, or of a checkpoint on a manifest split");
    c->add_option("--pred", pred, "Predicted image (.ppm)");
    c->add_option("--gt", gt, "Ground-truth image (.ppm)");
    c->add_option("--flow", flow, "Flow aligning gt to pred (.flo); required unless --aligned");
    c->add_flag("--aligned", aligned, "gt is already aligned with pred");
    c->add_option("--checkpoint", checkpoint, "Train state to evaluate on --manifest");
    c->add_option("--manifest", manifest, "Manifest whose entries carry ground-truth flows");
    c->add_option("--split", split, "Manifest split")->capture_default_str();
    c->add_option("-o,--out", out, "Optional JSON report path");
  }

  json run() const {
    EvalReport rep;
    if (!checkpoint.empty()) {
      const auto st = train::load_state(checkpoint);
      const auto data = train::prepare_split(load_manifest(require_flag(manifest, "--manifest")), split,
                                             train::AlignMode::NoAlign, st.cfg.mask);
      rep = train::evaluate_isp(st, data);
    } else {
      const RgbImage p = read_ppm(require_flag(pred, "--pred"));
      const RgbImage t = read_ppm(require_flag(gt, "--gt"));
      FlowField f;
      if (aligned) {
        f = FlowField(p.height(), p.width());
      } else {
        f = read_flo(require_flag(flow, "--flow (or --aligned)"));
      }
      rep.add(eval_aligned(p, t, &f, fs::path(pred).filename().string()));
    }
    json report = json::parse(rep.to_json());
    if (!out.empty()) {
      std::ofstream f(out);
      if (!f) throw IoError("cannot write '" + out + "'");
      f << report.dump(2) << "\n";
    }
    report["command"] = "eval";
    return report;
  }
};

struct AblateCmd {
  std::string grid, out_dir;
  std::size_t n_train = 64, n_test = 16, size = 40;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> variants;
  TrainFlags flags;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("ablate", "Train and score a variant grid on synthetic misaligned pairs");
    c->add_option("--grid", grid, "colormap, loss or color")->check(CLI::IsMember({"colormap", "loss", "color"}));
    c->add_option("--n-train", n_train, "Training pairs")->capture_default_str();
    c->add_option("--n-test", n_test, "Test pairs")->capture_default_str();
    c->add_option("--size", size, "RAW side of the synthetic pairs")->capture_default_str();
    c->add_option("--seeds", seeds, "Training seeds")->capture_default_str();
    c->add_option("--variants", variants, "Subset of the grid's rows");
    c->add_option("-o,--out-dir", out_dir, "Output directory (ablation.json, ablation.md)");
    flags.add_to(c, false);
  }

  json run(const Globals& g) const {
    require_flag(grid, "--grid");
    if (seeds.empty()) throw ParameterError("--seeds needs at least one seed");
    train::AblationSetup setup;
    setup.synth.height = size;
    setup.synth.width = size;
    setup.n_train = n_train;
    setup.n_test = n_test;
    setup.seeds = seeds;
    setup.base = flags.build(train::toy_config(), g.config, g.threads);
    const std::string dir = make_out_dir(out_dir);
    LogFile log(in_dir(dir, "ablate.log.jsonl"));
    const auto result = train::run_ablation(grid, setup, variants);
    std::ofstream(in_dir(dir, "ablation.json")) << result.to_json().dump(2) << "\n";
    std::ofstream(in_dir(dir, "ablation.md")) << result.to_markdown();
    json j = result.to_json();
    j["command"] = "ablate";
    j["out_dir"] = dir;
    return j;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"ispw: learned RAW-to-sRGB pipeline with color-map conditioning and masked training"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default 1 for reproducibility)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--config", g.config_path,
                 "JSON run config; keys name long flags of the subcommand, \"train\" holds training settings. "
                 "Explicit flags win");

  PreprocessCmd preprocess;
  ColormapCmd colormap;
  FlowmaskCmd flowmask;
  WarpCmd warp_cmd;
  SynthCmd synth;
  CropsCmd crops;
  TrainCmd train_cmd;
  InferCmd infer_cmd;
  EvalCmd eval_cmd;
  AblateCmd ablate;
  preprocess.add(app);
  colormap.add(app);
  flowmask.add(app);
  warp_cmd.add(app);
  synth.add(app);
  crops.add(app);
  train_cmd.add(app);
  infer_cmd.add(app);
  eval_cmd.add(app);
  ablate.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const bool takes_train_key = name == "train" || name == "ablate";
  if (!g.config_path.empty()) {
    g.config = read_json_file(g.config_path);
    if (!g.config.is_object()) throw ParameterError("--config must hold a JSON object");
    if (g.config.contains("train") && !takes_train_key) {
      throw ParameterError("config key 'train' only applies to train and ablate");
    }
    merge_config(app, g.config, {"train"});
  }

  json result;
  if (name == "preprocess") result = preprocess.run();
  else if (name == "colormap") result = colormap.run();
  else if (name == "flowmask") result = flowmask.run();
  else if (name == "warp") result = warp_cmd.run();
  else if (name == "synth") result = synth.run();
  else if (name == "crops") result = crops.run();
  else if (name == "train") result = train_cmd.run(g);
  else if (name == "infer") result = infer_cmd.run();
  else if (name == "eval") result = eval_cmd.run();
  else result = ablate.run(g);
  print_result(result);
  return 0;
}

}  // namespace
}  // namespace ispw::cli

int main(int argc, char** argv) {
  try {
    return ispw::cli::run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << ispw::cli::error_line(e) << std::endl;
    return ispw::cli::exit_code_for(e);
  }
}

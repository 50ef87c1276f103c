#include <cmath>
#include <fstream>
#include <json.hpp>

#include "ispw/ablate.hpp"
#include "ispw/events.hpp"
#include "ispw/imagecore.hpp"
#include "ispw/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ispw;
using namespace ispw::train;
using testsupport::random_image;
using testsupport::Tape;
using testsupport::random_tensor;

namespace {

struct EventLog {
  std::vector<nlohmann::json> seen;
  events::ScopedSink sink{[this](const nlohmann::json& e) { seen.push_back(e); }};
  std::size_t count(const std::string& name) const {
    std::size_t n = 0;
    for (const auto& e : seen) n += e.value("event", "") == name;
    return n;
  }
};

Tensor<float> ones_mask(std::size_t h, std::size_t w) { return Tensor<float>({1, h, w}, 1.0f); }

TrainConfig small_config() {
  TrainConfig cfg = toy_config();
  cfg.steps = 12;
  cfg.batch = 2;
  cfg.crop = 8;
  cfg.isp.rrdb_blocks = 1;
  cfg.isp.channels = 8;
  cfg.isp.growth = 4;
  cfg.pre.hidden = 8;
  return cfg;
}

std::vector<PreparedSample> small_data(std::size_t n, std::uint64_t seed) {
  SynthConfig sc;
  sc.height = 16;
  sc.width = 16;
  return prepare_synthetic(n, 0, seed, sc, AlignMode::Mask).train;
}

bool bitwise_equal(const ParamSet<float>& a, const ParamSet<float>& b) { return a == b; }

}  // namespace

// ---- Losses ----

TEST_CASE("isp loss is zero for a perfect prediction") {
  SplitMix64 rng(1);
  Tape<float> t;
  const auto y = random_tensor({3, 4, 4}, rng).cast<float>();
  CHECK(loss_isp(t.constant(y), t.constant(y), ones_mask(4, 4)).value()[0] == 0.0f);
}

TEST_CASE("isp loss with an all-zero mask is zero and warns") {
  EventLog log;
  SplitMix64 rng(2);
  Tape<float> t;
  const auto a = random_tensor({3, 4, 4}, rng).cast<float>();
  const auto b = random_tensor({3, 4, 4}, rng).cast<float>();
  CHECK(loss_isp(t.constant(a), t.constant(b), Tensor<float>({1, 4, 4})).value()[0] == 0.0f);
  CHECK(log.count("warning") == 1);
}

TEST_CASE("isp loss on the two-pixel example") {
  Tape<double> t;
  const Tensor<double> pred({1, 1, 2}, std::vector<double>{0.1, 0.3});
  const Tensor<double> mask({1, 1, 2}, std::vector<double>{1.0, 0.0});
  CHECK(loss_isp(t.constant(pred), t.constant(Tensor<double>({1, 1, 2})), mask).value()[0] == doctest::Approx(0.1));
}

TEST_CASE("constraint loss of a constant shift is the shift") {
  SplitMix64 rng(3);
  Tape<double> t;
  const auto xp = random_tensor({3, 10, 10}, rng, 0.0, 1.0);
  for (double kappa : {0.05, -0.2, 0.5}) {
    Tensor<double> xt = xp;
    for (double& v : xt.values()) v += kappa;
    const auto c = random_tensor({3, 10, 10}, rng, 0.0, 1.0);
    const auto xtv = t.constant(xt);
    const auto lp = loss_preprocess(xtv, xtv, t.constant(xp), t.constant(c), Tensor<double>({1, 10, 10}, 1.0));
    CHECK(lp.constraint.value()[0] == doctest::Approx(std::fabs(kappa)).epsilon(1e-9));
  }
}

TEST_CASE("reconstruction loss of a constant offset is the offset") {
  SplitMix64 rng(4);
  Tape<double> t;
  const auto raw = random_tensor({4, 6, 6}, rng, 0.0, 1.0);
  Tensor<double> recon = raw;
  for (double& v : recon.values()) v += 0.5;
  const auto color = random_tensor({3, 6, 6}, rng);
  const auto cl = loss_color_predictor(t.constant(color), t.constant(color), Tensor<double>({1, 6, 6}, 1.0),
                                       t.constant(recon), t.constant(raw));
  CHECK(cl.clr_pred.value()[0] == 0.0);
  CHECK(cl.reconstruct.value()[0] == doctest::Approx(0.5).epsilon(1e-12));
  const auto no_recon = loss_color_predictor(t.constant(color), t.constant(color), Tensor<double>({1, 6, 6}, 1.0),
                                             Var<double>{}, t.constant(raw));
  CHECK_FALSE(no_recon.reconstruct.valid());
}

TEST_CASE("float L1 losses agree with an extended-precision oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SplitMix64 rng(seed);
    Tape<float> t;
    const auto a = random_tensor({3, 9, 7}, rng).cast<float>();
    const auto b = random_tensor({3, 9, 7}, rng).cast<float>();
    Tensor<float> m({1, 9, 7});
    for (float& v : m.values()) v = rng.uniform() < 0.7 ? 1.0f : 0.0f;
    oracle::Real num = 0, den = 0, all = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < 63; ++i) {
        const oracle::Real d = std::fabs(oracle::Real(a[c * 63 + i]) - oracle::Real(b[c * 63 + i]));
        num += m[i] * d;
        den += m[i];
        all += d;
      }
    }
    CHECK(std::fabs(double(loss_isp(t.constant(a), t.constant(b), m).value()[0]) - double(num / den)) < 1e-6);
    CHECK(std::fabs(double(grad::l1(t.constant(a), t.constant(b)).value()[0]) - double(all / 189)) < 1e-6);
  }
}

TEST_CASE("masked sums grow with the mask") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tape<double> t;
    const auto a = t.constant(random_tensor({3, 5, 5}, rng));
    const auto b = t.constant(random_tensor({3, 5, 5}, rng));
    Tensor<double> small({1, 5, 5}), big({1, 5, 5});
    for (std::size_t i = 0; i < 25; ++i) {
      small[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
      big[i] = small[i] == 1.0 || rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    CHECK(grad::masked_l1(a, b, small, grad::Reduction::Sum).value()[0] <=
          grad::masked_l1(a, b, big, grad::Reduction::Sum).value()[0]);
  }
}

TEST_CASE("pre-processing losses pass finite differences in the noise estimator") {
  PreprocessConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 4;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto ps = init_preprocess(cfg, seed).cast<double>();
    SplitMix64 rng(seed);
    const auto xp = grad::from_image<double>(random_image<RgbImage>(6, 6, rng, 0.1, 0.9));
    const auto coords = grad::from_image<double>(make_coord_map(6, 6));
    const auto c = random_image<RgbImage>(6, 6, rng);
    Tensor<double> mask({1, 6, 6}, 1.0);
    mask[7] = 0.0;
    ColorMapOptions copt;
    copt.bins = 3;
    ColorMapModel model;
    {
      Tape<double> t;
      const auto xt = preprocess(models::Scope<double>{t, ps, ""}, t.constant(xp), t.constant(coords), cfg);
      model = fit(grad::to_image<RgbImage>(xt.value()), c, copt);
    }
    auto fn = [&](Tape<double>& t, const ParamSet<double>& p) {
      const auto xpv = t.constant(xp);
      const auto xt = preprocess(models::Scope<double>{t, p, ""}, xpv, t.constant(coords), cfg);
      const auto lp = loss_preprocess(colormap_apply(xt, model), xt, xpv, t.constant(grad::from_image<double>(c)), mask);
      return grad::add(lp.map, lp.constraint);
    };
    const auto report = grad::finite_diff_check(fn, ps);
    INFO(report.summary());
    CHECK(report.max_rel_err() < 1e-4);
  }
}

TEST_CASE("loss weights must be non-negative") {
  LossWeights w;
  w.map = -1.0;
  CHECK_THROWS_AS(w.validate(), ParameterError);
}

// ---- Augmentation ----

TEST_CASE("zero jitter is the identity") {
  SplitMix64 rng(6);
  const auto y = random_image<RgbImage>(8, 8, rng, 0.05, 0.95);
  const RgbImage out = color_jitter(y, ColorJitter{});
  for (std::size_t i = 0; i < y.values().size(); ++i) CHECK(std::fabs(out.values()[i] - y.values()[i]) < 1e-6);
}

TEST_CASE("gray pixels are fixed points of saturation and hue") {
  RgbImage gray(4, 4);
  SplitMix64 rng(7);
  for (std::size_t i = 0; i < gray.pixels(); ++i) {
    const float v = float(rng.uniform(0.1, 0.9));
    for (std::size_t c = 0; c < 3; ++c) gray.plane(c)[i] = v;
  }
  ColorJitter j;
  j.saturation = 0.3;
  j.hue = -0.15;
  const RgbImage out = color_jitter(gray, j);
  for (std::size_t i = 0; i < gray.values().size(); ++i) CHECK(std::fabs(out.values()[i] - gray.values()[i]) < 1e-6);
}

TEST_CASE("brightness offset adds to every value") {
  RgbImage y(3, 3);
  for (float& v : y.values()) v = 0.5f;
  ColorJitter j;
  j.brightness = 0.1;
  const RgbImage out = color_jitter(y, j);
  for (float v : out.values()) CHECK(v == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("random jitter stays in range and is seeded") {
  SplitMix64 a(3), b(3);
  for (int i = 0; i < 100; ++i) {
    const ColorJitter j = random_jitter(a, 0.2);
    const ColorJitter k = random_jitter(b, 0.2);
    CHECK(j.hue == k.hue);
    for (double v : {j.brightness, j.contrast, j.saturation, j.hue}) CHECK(std::fabs(v) <= 0.2);
  }
}

TEST_CASE("the eight dihedral codes are distinct and invertible") {
  SplitMix64 rng(8);
  const auto img = random_image<RgbImage>(5, 5, rng);
  std::vector<RgbImage> seen;
  for (unsigned code = 0; code < 8; ++code) {
    const RgbImage d = dihedral(img, code);
    for (const auto& s : seen) CHECK_FALSE(s == d);
    seen.push_back(d);
    bool inverted = false;
    for (unsigned inv = 0; inv < 8; ++inv) inverted = inverted || dihedral(d, inv) == img;
    CHECK(inverted);
  }
  CHECK(dihedral(img, 0) == img);
  const auto rect = random_image<RawImage>(3, 6, rng);
  CHECK(dihedral(rect, 1).height() == 6);
  CHECK(dihedral(dihedral(rect, 1), 1) == rect);
}

// ---- Optimizer ----

TEST_CASE("adam with zero gradient leaves parameters and counts the step") {
  SplitMix64 rng(9);
  ParamSet<float> p;
  p.add("w", random_tensor({3, 4}, rng).cast<float>());
  const ParamSet<float> before = p;
  AdamState st;
  adam_step(p, p.zeros_like(), st, {});
  CHECK(p == before);
  CHECK(st.step == 1);
}

TEST_CASE("first adam step moves by the learning rate against the gradient sign") {
  SplitMix64 rng(10);
  ParamSet<float> p;
  p.add("w", random_tensor({20}, rng).cast<float>());
  ParamSet<float> g;
  g.add("w", random_tensor({20}, rng, 0.1, 2.0).cast<float>());
  for (std::size_t i = 0; i < 20; i += 2) g.at("w")[i] = -g.at("w")[i];
  const ParamSet<float> before = p;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  AdamState st;
  adam_step(p, g, st, cfg);
  for (std::size_t i = 0; i < 20; ++i) {
    const double step = double(p.at("w")[i]) - double(before.at("w")[i]);
    CHECK(step == doctest::Approx(-1e-3 * (g.at("w")[i] > 0 ? 1.0 : -1.0)).epsilon(1e-3));
  }
}

TEST_CASE("adam with zero learning rate leaves parameters") {
  SplitMix64 rng(11);
  ParamSet<float> p;
  p.add("w", random_tensor({6}, rng).cast<float>());
  ParamSet<float> g;
  g.add("w", random_tensor({6}, rng).cast<float>());
  const ParamSet<float> before = p;
  AdamConfig cfg;
  cfg.lr = 0.0;
  AdamState st;
  for (int i = 0; i < 3; ++i) adam_step(p, g, st, cfg);
  CHECK(p == before);
  g.add("missing", Tensor<float>({1}));
  CHECK_THROWS_AS(adam_step(p, g, st, cfg), ParameterError);
}

TEST_CASE("learning rate halves at 50, 75, 90 and 95 percent") {
  CHECK(lr_multiplier(49, 100) == 1.0);
  CHECK(lr_multiplier(50, 100) == 0.5);
  CHECK(lr_multiplier(75, 100) == 0.25);
  CHECK(lr_multiplier(90, 100) == 0.125);
  CHECK(lr_multiplier(95, 100) == 0.0625);
  CHECK(lr_multiplier(99, 100) == 0.0625);
  CHECK(lr_multiplier(0, 3) == 1.0);
}

// ---- Configuration ----

TEST_CASE("config round trips through JSON") {
  TrainConfig cfg = small_config();
  cfg.align = AlignMode::AlignedLoss;
  cfg.color_variant = "const_val";
  cfg.unet.channels = {4, 8, 16};
  cfg.unet.latent_count = {4, 4, 4};
  cfg.unet.latent_dim = {8, 8, 8};
  cfg.weights.constraint = 0.5;
  const TrainConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.unet.channels.size() == 3);
}

TEST_CASE("config keeps defaults for missing keys and rejects unknown ones") {
  const TrainConfig base = small_config();
  const TrainConfig c = config_from_json(nlohmann::json{{"steps", 7}, {"adam", {{"lr", 0.01}}}}, base);
  CHECK(c.steps == 7);
  CHECK(c.adam.lr == 0.01);
  CHECK(c.batch == base.batch);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"stepz", 7}}), ParameterError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"adam", {{"learning_rate", 1}}}}), ParameterError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"steps", "many"}}), ParameterError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"align", "sideways"}}), ParameterError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ParameterError);
}

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  c.crop = 7;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.color_variant = "rainbow";
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = small_config();
  c.color_variant = "no_color_pred";
  CHECK(c.color_source() == ColorSource::NoColorPred);
  CHECK_FALSE(c.uses_preprocess());
  CHECK_THROWS_AS(c.fit_variant(), StateError);
  c.color_variant = "ColorBlur";
  CHECK(c.color_source() == ColorSource::ColorBlur);
}

// ---- Sample preparation ----

TEST_CASE("prepared samples follow the alignment mode") {
  SplitMix64 rng(12);
  const auto raw = random_image<RawImage>(6, 6, rng);
  const auto target = random_image<RgbImage>(12, 12, rng);
  const FlowField zero(6, 6);
  FlowField bad(6, 6);
  for (float& v : bad.plane(0)) v = 3.0f;

  const auto na = prepare_sample("a", raw, target, nullptr, nullptr, AlignMode::NoAlign);
  CHECK(na.y == target);
  CHECK(na.c == downsample_bilinear_2x(target));
  CHECK(na.xprime == gamma_process(raw));

  const auto al = prepare_sample("a", raw, target, &zero, &zero, AlignMode::AlignedLoss);
  CHECK(al.y == target);
  for (float v : al.m.values()) CHECK(v == 1.0f);

  const auto mk = prepare_sample("a", raw, target, &bad, &zero, AlignMode::Mask);
  for (float v : mk.m.values()) CHECK(v == 0.0f);

  CHECK_THROWS_AS(prepare_sample("a", raw, RgbImage(10, 12), nullptr, nullptr, AlignMode::NoAlign), DimensionError);
  CHECK_THROWS_AS(prepare_sample("a", raw, target, nullptr, nullptr, AlignMode::AlignedLoss), ParameterError);
  CHECK_THROWS_AS(prepare_sample("a", raw, target, &zero, nullptr, AlignMode::Mask), ParameterError);
}

// ---- Training loops ----

TEST_CASE("fifty steps reduce the training loss") {
  double early = 0.0, late = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto data = small_data(4, seed);
    TrainConfig cfg = small_config();
    cfg.seed = seed;
    cfg.steps = 50;
    TrainState st = init_state(cfg, TrainMode::Isp);
    const auto reps = run_training(st, data);
    REQUIRE(reps.size() == 50);
    for (std::size_t i = 0; i < 5; ++i) {
      early += reps[i].loss;
      late += reps[45 + i].loss;
    }
  }
  CHECK(late < early);
}

TEST_CASE("color predictor stays finite over 100 adam steps on random data") {
  TrainConfig cfg = small_config();
  cfg.steps = 100;
  cfg.unet.channels = {4, 8};
  cfg.unet.latent_count = {4, 4};
  cfg.unet.latent_dim = {8, 8};
  std::vector<PreparedSample> data;
  SplitMix64 rng(13);
  for (int i = 0; i < 3; ++i) {
    const auto raw = random_image<RawImage>(8, 8, rng);
    data.push_back(prepare_sample("r" + std::to_string(i), raw, random_image<RgbImage>(16, 16, rng), nullptr, nullptr,
                                  AlignMode::NoAlign));
  }
  TrainState st = init_state(cfg, TrainMode::Color);
  const auto reps = run_training(st, data);
  CHECK(st.params.all_finite());
  for (const auto& r : reps) CHECK(std::isfinite(r.loss));
  CHECK(reps.back().parts.count("clr_pred") == 1);
  CHECK(reps.back().parts.count("reconstruct") == 1);
}

TEST_CASE("training is bitwise reproducible and independent of thread count") {
  const auto data = small_data(3, 5);
  TrainConfig cfg = small_config();
  cfg.steps = 4;
  cfg.batch = 3;
  TrainState a = init_state(cfg, TrainMode::Isp);
  TrainState b = init_state(cfg, TrainMode::Isp);
  cfg.threads = 3;
  TrainState c = init_state(cfg, TrainMode::Isp);
  run_training(a, data);
  run_training(b, data);
  run_training(c, data);
  CHECK(bitwise_equal(a.params, b.params));
  CHECK(bitwise_equal(a.params, c.params));
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  const auto dir = testsupport::scratch_dir("resume");
  const auto data = small_data(3, 6);
  for (TrainMode mode : {TrainMode::Isp, TrainMode::Joint}) {
    TrainConfig cfg = small_config();
    cfg.steps = 6;
    cfg.unet.channels = {4, 8};
    cfg.unet.latent_count = {4, 4};
    cfg.unet.latent_dim = {8, 8};
    TrainState full = init_state(cfg, mode);
    const auto ref = run_training(full, data);

    TrainConfig half_cfg = cfg;
    half_cfg.steps = 3;
    TrainState half = init_state(half_cfg, mode);
    half.cfg.steps = 6;  // keep the schedule of the full run
    while (half.adam.step < 3) train_step(half, data);
    const std::string path = (dir / "state.ckpt").string();
    save_state(path, half);
    TrainState resumed = load_state(path);
    CHECK(resumed.adam.step == 3);
    CHECK(bitwise_equal(resumed.params, half.params));
    const StepReport next = train_step(resumed, data);
    CHECK(next.loss == ref[3].loss);
    run_training(resumed, data);
    CHECK(bitwise_equal(resumed.params, full.params));
  }
}

TEST_CASE("training emits step events and writes checkpoints") {
  EventLog log;
  const auto dir = testsupport::scratch_dir("events");
  TrainConfig cfg = small_config();
  cfg.steps = 6;
  cfg.log_every = 2;
  cfg.checkpoint_every = 3;
  TrainState st = init_state(cfg, TrainMode::Isp);
  TrainOptions opt;
  opt.checkpoint_path = (dir / "m.ckpt").string();
  std::size_t calls = 0;
  opt.on_step = [&](const StepReport&) { ++calls; };
  run_training(st, small_data(2, 7), opt);
  CHECK(calls == 6);
  CHECK(log.count("step") == 3);
  CHECK(log.count("train_done") == 1);
  CHECK(load_state(opt.checkpoint_path).adam.step == 6);
}

TEST_CASE("color variants select how c-hat is formed") {
  const auto data = small_data(2, 8);
  for (const char* v : {"affine_dep", "const_val", "linear3x3", "color_blur", "no_color_pred"}) {
    TrainConfig cfg = small_config();
    cfg.steps = 2;
    cfg.color_variant = v;
    TrainState st = init_state(cfg, TrainMode::Isp);
    CHECK(st.has_preprocess() == cfg.uses_preprocess());
    const auto reps = run_training(st, data);
    CHECK(reps.back().parts.count("map") == (cfg.uses_preprocess() ? 1u : 0u));
  }
}

TEST_CASE("crop larger than a sample is rejected") {
  TrainConfig cfg = small_config();
  cfg.crop = 64;
  TrainState st = init_state(cfg, TrainMode::Isp);
  CHECK_THROWS_AS(train_step(st, small_data(1, 9)), ParameterError);
  CHECK_THROWS_AS(train_step(st, {}), ParameterError);
}

// ---- State files and inference ----

TEST_CASE("state files round trip and reject mismatches") {
  const auto dir = testsupport::scratch_dir("state");
  TrainConfig cfg = small_config();
  cfg.steps = 2;
  TrainState st = init_state(cfg, TrainMode::Isp);
  run_training(st, small_data(2, 10));
  const std::string path = (dir / "s.ckpt").string();
  save_state(path, st);
  const TrainState back = load_state(path);
  CHECK(back.mode == TrainMode::Isp);
  CHECK(back.adam.step == 2);
  CHECK(back.params == st.params);
  CHECK(back.adam.m == st.adam.m);
  CHECK(back.adam.v == st.adam.v);
  CHECK(config_to_json(back.cfg) == config_to_json(st.cfg));

  nlohmann::json side;
  std::ifstream(path + ".json") >> side;
  side["config"]["isp"]["channels"] = 12;
  std::ofstream(path + ".json") << side.dump();
  CHECK_THROWS_AS(load_state(path), FormatError);

  std::ofstream(path + ".json") << "{not json";
  CHECK_THROWS_AS(load_state(path), FormatError);
  CHECK_THROWS_AS(load_state((dir / "absent.ckpt").string()), IoError);
}

TEST_CASE("inference doubles the resolution and follows the color source") {
  SplitMix64 rng(14);
  TrainConfig cfg = small_config();
  cfg.unet.channels = {4, 8};
  cfg.unet.latent_count = {4, 4};
  cfg.unet.latent_dim = {8, 8};
  const TrainState joint = init_state(cfg, TrainMode::Joint);
  const TrainState isp = init_state(cfg, TrainMode::Isp);
  const TrainState color = init_state(cfg, TrainMode::Color);
  const auto raw = random_image<RawImage>(12, 16, rng);

  const auto r = infer(raw, joint, nullptr, nullptr);
  CHECK(r.yhat.height() == 24);
  CHECK(r.yhat.width() == 32);
  CHECK(r.c.height() == 12);
  CHECK(r.xprime == gamma_process(raw));
  CHECK(all_finite(r.yhat));

  const auto given = random_image<RgbImage>(12, 16, rng);
  CHECK(infer(raw, isp, nullptr, &given).c == given);
  CHECK(infer(raw, isp, &color, nullptr).c == infer(raw, joint, nullptr, nullptr).c);
  CHECK_THROWS_AS(infer(raw, isp, nullptr, nullptr), ParameterError);
  CHECK_THROWS_AS(infer(raw, color, nullptr, &given), StateError);
  CHECK_THROWS_AS(infer(raw, isp, &isp, nullptr), StateError);

  const auto a = infer(raw, joint, nullptr, nullptr);
  CHECK(a.yhat == r.yhat);
}

TEST_CASE("held-out evaluation needs exact flows") {
  TrainConfig cfg = small_config();
  const TrainState st = init_state(cfg, TrainMode::Isp);
  SynthConfig sc;
  sc.height = 16;
  sc.width = 16;
  const auto splits = prepare_synthetic(1, 2, 3, sc, AlignMode::Mask);
  const EvalReport rep = evaluate_isp(st, splits.test);
  CHECK(std::isfinite(rep.mean_psnr()));
  auto no_flow = splits.test;
  no_flow[0].gt_flow = FlowField();
  CHECK_THROWS_AS(evaluate_isp(st, no_flow), ParameterError);
}

TEST_CASE("mode and alignment names parse") {
  for (TrainMode m : {TrainMode::Isp, TrainMode::Color, TrainMode::Joint}) CHECK(parse_mode(mode_name(m)) == m);
  for (AlignMode m : {AlignMode::NoAlign, AlignMode::AlignedLoss, AlignMode::Mask}) CHECK(parse_align(align_name(m)) == m);
  CHECK(parse_align("AlignedLoss") == AlignMode::AlignedLoss);
  CHECK_THROWS_AS(parse_mode("both"), ParameterError);
}

TEST_CASE("ablation grids name their rows and report per-seed scores") {
  CHECK(grid_variants("loss") == std::vector<std::string>{"NoAlign", "AlignedLoss", "Mask"});
  CHECK(grid_variants("colormap").size() == 6);
  CHECK(grid_variants("color").size() == 3);
  CHECK_THROWS_AS(grid_variants("lighting"), ParameterError);

  AblationSetup setup;
  CHECK(setup.base.steps == toy_config().steps);
  setup.synth.height = 16;
  setup.synth.width = 16;
  setup.n_train = 2;
  setup.n_test = 1;
  setup.seeds = {1, 2};
  setup.base.steps = 2;
  setup.base.crop = 8;
  const auto result = run_ablation("colormap", setup, {"ConstValMap", "AffineMapDep"});
  REQUIRE(result.rows.size() == 2);
  for (const auto& row : result.rows) {
    CHECK(row.psnr.size() == 2);
    CHECK(row.residual.size() == 2);
  }
  CHECK(result.row("ConstValMap").mean_residual() >= result.row("AffineMapDep").mean_residual() - 1e-9);
  CHECK(result.to_json()["rows"].size() == 2);
  CHECK(result.to_markdown().find("AffineMapDep") != std::string::npos);
  CHECK_THROWS_AS(result.row("Sepia"), ParameterError);
  CHECK_THROWS_AS(run_ablation("colormap", setup, {"Sepia"}), ParameterError);
}

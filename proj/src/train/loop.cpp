#include <atomic>
#include <exception>
#include <fstream>
#include <thread>

#include "ispw/events.hpp"
#include "ispw/grad/checkpoint.hpp"
#include "ispw/imagecore.hpp"
#include "ispw/pipeline.hpp"

namespace ispw::train {

using grad::from_image;
using grad::to_image;
using models::Scope;

namespace {

constexpr std::uint64_t kPreSeed = 1001;
constexpr std::uint64_t kIspSeed = 1002;
constexpr std::uint64_t kColorSeed = 1003;

MaskImage ones_mask(std::size_t h, std::size_t w) {
  MaskImage m(h, w);
  for (float& v : m.values()) v = 1.0f;
  return m;
}

bool has_prefix(const ParamSet<float>& ps, const std::string& prefix) {
  for (const auto& [name, _] : ps) {
    if (name.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return false;
}

void merge(ParamSet<float>& dst, const ParamSet<float>& src) {
  for (const auto& [name, t] : src) dst.add(name, t);
}

/// Per-sample randomness, drawn serially before any parallel work.
struct Draw {
  std::size_t index = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t side_h = 0;
  std::size_t side_w = 0;
  unsigned dihedral = 0;
  ColorJitter jitter;
  /// Mask mass of this crop relative to the batch mean.
  double mask_weight = 1.0;
};

struct SampleResult {
  ParamSet<float> grads;
  std::map<std::string, double> parts;
  double loss = 0.0;
};

struct Crops {
  RawImage raw;
  RgbImage xprime;
  CoordMap coords;
  RgbImage y;
  RgbImage c;
  MaskImage m;
  MaskImage m_up;
};

Crops make_crops(const PreparedSample& s, const Draw& d, bool jitter) {
  Crops k;
  k.raw = dihedral(crop(s.raw, d.row, d.col, d.side_h, d.side_w), d.dihedral);
  k.xprime = dihedral(crop(s.xprime, d.row, d.col, d.side_h, d.side_w), d.dihedral);
  k.coords = dihedral(crop(s.coords, d.row, d.col, d.side_h, d.side_w), d.dihedral);
  k.c = dihedral(crop(s.c, d.row, d.col, d.side_h, d.side_w), d.dihedral);
  k.m = dihedral(crop(s.m, d.row, d.col, d.side_h, d.side_w), d.dihedral);
  k.y = dihedral(crop(s.y, 2 * d.row, 2 * d.col, 2 * d.side_h, 2 * d.side_w), d.dihedral);
  k.m_up = upsample_nearest_2x(k.m);
  if (jitter) {
    k.y = color_jitter(k.y, d.jitter);
    k.c = color_jitter(k.c, d.jitter);
  }
  return k;
}

SampleResult sample_gradient(const TrainState& state, const PreparedSample& sample, const Draw& d) {
  const TrainConfig& cfg = state.cfg;
  const bool isp_part = state.mode != TrainMode::Color;
  const bool color_part = state.mode != TrainMode::Isp;
  const Crops k = make_crops(sample, d, cfg.jitter && state.mode == TrainMode::Isp);

  grad::Tape<float> tape;
  const Scope<float> s{tape, state.params, ""};
  SampleResult out;
  Var<float> total;
  auto add_term = [&](const char* name, Var<float> v, double w) {
    out.parts[name] = w * double(v.value()[0]);
    Var<float> term = grad::scalar_mul(v, float(w));
    total = total.valid() ? grad::add(total, term) : term;
  };

  const Var<float> raw = tape.constant(from_image<float>(k.raw));
  const Var<float> coords = tape.constant(from_image<float>(k.coords));
  const Var<float> c_al = tape.constant(from_image<float>(k.c));
  const Tensor<float> mask = from_image<float>(k.m);

  RgbImage fit_target = k.c;
  // The aligned target is only trusted where the mask is set; G's own
  // prediction (joint mode) is trusted everywhere.
  const MaskImage* fit_mask = &k.m;
  if (color_part) {
    const auto cp = models::color_predictor(s.sub("color"), raw, coords, cfg.unet);
    const auto cl = loss_color_predictor(cp.color, c_al, mask, cp.recon, raw);
    add_term("clr_pred", cl.clr_pred, cfg.weights.clr_pred * d.mask_weight);
    if (cl.reconstruct.valid()) add_term("reconstruct", cl.reconstruct, cfg.weights.reconstruct);
    fit_target = to_image<RgbImage>(cp.color.value());
    fit_mask = nullptr;
  }

  if (isp_part) {
    const Var<float> xprime = tape.constant(from_image<float>(k.xprime));
    const bool use_pre = cfg.uses_preprocess();
    const Var<float> xt = use_pre ? preprocess(s.sub("pre"), xprime, coords, cfg.pre) : xprime;
    Var<float> chat;
    switch (cfg.color_source()) {
      case ColorSource::Fit: {
        const ColorMapModel model = fit(to_image<RgbImage>(xt.value()), fit_target, cfg.colormap_options(), fit_mask);
        chat = colormap_apply(xt, model);
        if (use_pre) {
          const auto lp = loss_preprocess(chat, xt, xprime, c_al, mask);
          add_term("map", lp.map, cfg.weights.map * d.mask_weight);
          add_term("constraint", lp.constraint, cfg.weights.constraint);
        }
        break;
      }
      case ColorSource::ColorBlur: {
        const RgbImage xti = to_image<RgbImage>(xt.value());
        chat = tape.constant(from_image<float>(apply(xti, fit(xti, fit_target, cfg.colormap_options(), fit_mask))));
        break;
      }
      case ColorSource::NoColorPred:
        chat = tape.constant(Tensor<float>({3, k.c.height(), k.c.width()}));
        break;
    }
    const Var<float> yhat = models::ispnet(s.sub("isp"), raw, tape.constant(chat.value()), cfg.isp);
    add_term("pred", loss_isp(yhat, tape.constant(from_image<float>(k.y)), from_image<float>(k.m_up)),
             cfg.weights.pred * d.mask_weight);
  }

  out.loss = double(total.value()[0]);
  out.grads = tape.backward(total);
  return out;
}

}  // namespace

PreparedSample prepare_sample(const std::string& id, const RawImage& raw, const RgbImage& target,
                              const FlowField* flow_fwd, const FlowField* flow_bwd, AlignMode mode,
                              const FbMaskOptions& mask) {
  if (target.height() != 2 * raw.height() || target.width() != 2 * raw.width()) {
    throw DimensionError("sample '" + id + "': target " + std::to_string(target.height()) + "x" +
                         std::to_string(target.width()) + " is not twice the RAW " + std::to_string(raw.height()) +
                         "x" + std::to_string(raw.width()));
  }
  PreparedSample s;
  s.id = id;
  s.raw = raw;
  s.xprime = gamma_process(raw);
  s.coords = make_coord_map(raw.height(), raw.width());
  s.target = target;
  const RgbImage low = downsample_bilinear_2x(target);
  if (mode == AlignMode::NoAlign) {
    s.y = target;
    s.c = low;
    s.m = ones_mask(raw.height(), raw.width());
    return s;
  }
  if (flow_fwd == nullptr) throw ParameterError("sample '" + id + "': alignment needs a forward flow");
  require_same_dims(raw, *flow_fwd, "prepare_sample forward flow");
  s.y = warp(target, upsample_flow_2x(*flow_fwd));
  s.c = warp(low, *flow_fwd);
  if (mode == AlignMode::Mask) {
    if (flow_bwd == nullptr) throw ParameterError("sample '" + id + "': the consistency mask needs a backward flow");
    s.m = fb_mask(*flow_fwd, *flow_bwd, mask);
  } else {
    s.m = ones_mask(raw.height(), raw.width());
  }
  return s;
}

std::vector<PreparedSample> prepare_split(const Manifest& m, const std::string& split, AlignMode mode,
                                          const FbMaskOptions& mask) {
  std::vector<PreparedSample> out;
  for (const ManifestEntry& e : m.entries) {
    if (!split.empty() && e.split != split) continue;
    const RawImage raw = read_raw4(m.resolve(e.raw));
    const RgbImage target = read_ppm(m.resolve(e.target));
    std::optional<FlowField> fwd, bwd;
    if (!e.flow_fwd.empty()) fwd = read_flo(m.resolve(e.flow_fwd));
    if (!e.flow_bwd.empty()) bwd = read_flo(m.resolve(e.flow_bwd));
    out.push_back(prepare_sample(e.id, raw, target, fwd ? &*fwd : nullptr, bwd ? &*bwd : nullptr, mode, mask));
    if (!e.gt_flow.empty()) out.back().gt_flow = read_flo(m.resolve(e.gt_flow));
  }
  if (out.empty()) throw ParameterError("manifest has no samples in split '" + split + "'");
  return out;
}

std::string_view mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::Isp: return "isp";
    case TrainMode::Color: return "color";
    case TrainMode::Joint: return "joint";
  }
  return "?";
}

TrainMode parse_mode(std::string_view name) {
  if (name == "isp") return TrainMode::Isp;
  if (name == "color") return TrainMode::Color;
  if (name == "joint") return TrainMode::Joint;
  throw ParameterError("unknown training mode '" + std::string(name) + "' (isp, color, joint)");
}

bool TrainState::has_preprocess() const { return has_prefix(params, "pre."); }
bool TrainState::has_isp() const { return has_prefix(params, "isp."); }
bool TrainState::has_color() const { return has_prefix(params, "color."); }

TrainState init_state(const TrainConfig& cfg, TrainMode mode) {
  cfg.validate();
  TrainState st;
  st.cfg = cfg;
  st.mode = mode;
  if (mode != TrainMode::Color) {
    if (cfg.uses_preprocess()) {
      merge(st.params, grad::add_prefix(init_preprocess(cfg.pre, derive_seed(cfg.seed, kPreSeed)), "pre."));
    }
    merge(st.params, grad::add_prefix(models::init_ispnet(cfg.isp, derive_seed(cfg.seed, kIspSeed)), "isp."));
  }
  if (mode != TrainMode::Isp) {
    merge(st.params,
          grad::add_prefix(models::init_color_predictor(cfg.unet, derive_seed(cfg.seed, kColorSeed)), "color."));
  }
  return st;
}

StepReport train_step(TrainState& state, const std::vector<PreparedSample>& data) {
  const TrainConfig& cfg = state.cfg;
  if (data.empty()) throw ParameterError("training set is empty");
  const std::uint64_t step = state.adam.step;
  SplitMix64 rng(derive_seed(cfg.seed, step));

  std::vector<Draw> draws(cfg.batch);
  for (Draw& d : draws) {
    d.index = std::size_t(rng.below(data.size()));
    const PreparedSample& s = data[d.index];
    const std::size_t h = s.raw.height(), w = s.raw.width();
    d.side_h = cfg.crop == 0 ? h : cfg.crop;
    d.side_w = cfg.crop == 0 ? w : cfg.crop;
    if (d.side_h > h || d.side_w > w) {
      throw ParameterError("crop " + std::to_string(cfg.crop) + " exceeds sample '" + s.id + "' of size " +
                           std::to_string(h) + "x" + std::to_string(w));
    }
    d.row = std::size_t(rng.below(h - d.side_h + 1));
    d.col = std::size_t(rng.below(w - d.side_w + 1));
    if (cfg.augment) d.dihedral = unsigned(rng.below(d.side_h == d.side_w ? 8 : 4) << (d.side_h == d.side_w ? 0 : 1));
    if (cfg.jitter) d.jitter = random_jitter(rng, cfg.jitter_range);
  }
  // Masked terms are normalized by the mask mass of the whole batch, so a
  // mostly-masked crop does not get its few valid pixels up-weighted.
  std::vector<double> mass(cfg.batch);
  double total_mass = 0.0;
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    const Draw& d = draws[b];
    const MaskImage& m = data[d.index].m;
    for (std::size_t r = 0; r < d.side_h; ++r) {
      for (std::size_t c = 0; c < d.side_w; ++c) mass[b] += m.at(0, d.row + r, d.col + c);
    }
    total_mass += mass[b];
  }
  for (std::size_t b = 0; b < cfg.batch; ++b) {
    draws[b].mask_weight = total_mass > 0.0 ? mass[b] * double(cfg.batch) / total_mass : 0.0;
  }

  std::vector<SampleResult> results(cfg.batch);
  std::vector<std::exception_ptr> errors(cfg.batch);
  auto work = [&](std::size_t b) {
    try {
      results[b] = sample_gradient(state, data[draws[b].index], draws[b]);
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(cfg.threads, cfg.batch);
  if (workers <= 1) {
    for (std::size_t b = 0; b < cfg.batch; ++b) work(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < cfg.batch; b = next++) work(b);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  StepReport rep;
  ParamSet<float> mean = state.params.zeros_like();
  const double inv = 1.0 / double(cfg.batch);
  for (const SampleResult& r : results) {
    mean.add_scaled(r.grads, float(inv));
    rep.loss += r.loss * inv;
    for (const auto& [k, v] : r.parts) rep.parts[k] += v * inv;
  }
  const double mult = cfg.lr_schedule ? lr_multiplier(step, cfg.steps) : 1.0;
  adam_step(state.params, mean, state.adam, cfg.adam, mult);
  rep.step = state.adam.step;
  rep.lr = cfg.adam.lr * mult;
  return rep;
}

std::vector<StepReport> run_training(TrainState& state, const std::vector<PreparedSample>& data, const TrainOptions& opt) {
  std::vector<StepReport> out;
  const TrainConfig& cfg = state.cfg;
  while (state.adam.step < cfg.steps) {
    StepReport r = train_step(state, data);
    if (opt.on_step) opt.on_step(r);
    if (cfg.log_every != 0 && (r.step % cfg.log_every == 0 || r.step == cfg.steps)) {
      nlohmann::json ev{{"event", "step"}, {"mode", mode_name(state.mode)}, {"step", r.step}, {"loss", r.loss},
                        {"lr", r.lr}};
      for (const auto& [k, v] : r.parts) ev["parts"][k] = v;
      events::emit(ev);
    }
    if (!opt.checkpoint_path.empty() && cfg.checkpoint_every != 0 && r.step % cfg.checkpoint_every == 0) {
      save_state(opt.checkpoint_path, state);
    }
    out.push_back(std::move(r));
  }
  if (!opt.checkpoint_path.empty()) save_state(opt.checkpoint_path, state);
  events::emit({{"event", "train_done"},
                {"mode", mode_name(state.mode)},
                {"step", state.adam.step},
                {"loss", out.empty() ? 0.0 : out.back().loss}});
  return out;
}

void save_state(const std::string& path, const TrainState& state) {
  ParamSet<float> all = state.params;
  merge(all, grad::add_prefix(state.adam.m, "adam.m."));
  merge(all, grad::add_prefix(state.adam.v, "adam.v."));
  grad::save_checkpoint(path, all);
  const nlohmann::json side{{"format", "ispw-train-state"},
                            {"version", 1},
                            {"mode", mode_name(state.mode)},
                            {"step", state.adam.step},
                            {"config", config_to_json(state.cfg)}};
  std::ofstream f(path + ".json");
  f << side.dump(2) << '\n';
  if (!f) throw IoError("cannot write '" + path + ".json'");
}

TrainState load_state(const std::string& path) {
  std::ifstream f(path + ".json");
  if (!f) throw IoError("cannot open '" + path + ".json' (checkpoint sidecar)");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + ".json': " + e.what());
  }
  if (!side.is_object() || side.value("format", "") != "ispw-train-state" || side.value("version", 0) != 1) {
    throw FormatError("'" + path + ".json' is not a version 1 train-state sidecar");
  }
  TrainState st;
  try {
    st = init_state(config_from_json(side.at("config")), parse_mode(side.at("mode").get<std::string>()));
    st.adam.step = side.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + ".json': " + e.what());
  }
  const ParamSet<float> all = grad::load_checkpoint(path);
  for (const auto& [name, t] : all) {
    if (name.rfind("adam.m.", 0) == 0) {
      st.adam.m.add(name.substr(7), t);
    } else if (name.rfind("adam.v.", 0) == 0) {
      st.adam.v.add(name.substr(7), t);
    } else if (!st.params.contains(name) || st.params.at(name).shape() != t.shape()) {
      throw FormatError("checkpoint '" + path + "': parameter '" + name + "' does not match the stored config");
    } else {
      st.params.at(name) = t;
    }
  }
  for (const auto& [name, _] : st.params) {
    if (!all.contains(name)) throw FormatError("checkpoint '" + path + "' is missing parameter '" + name + "'");
  }
  return st;
}

RgbImage color_condition(const TrainState& isp, const RgbImage& xtilde, const RgbImage& c) {
  require_same_dims(xtilde, c, "color_condition");
  switch (isp.cfg.color_source()) {
    case ColorSource::NoColorPred: return RgbImage(c.height(), c.width());
    case ColorSource::Fit:
    case ColorSource::ColorBlur: break;
  }
  return apply(xtilde, fit(xtilde, c, isp.cfg.colormap_options()));
}

InferenceResult infer(const RawImage& raw, const TrainState& isp, const TrainState* color,
                      const RgbImage* color_image) {
  if (!isp.has_isp()) throw StateError("checkpoint holds no ISP network (trained in color mode?)");
  InferenceResult r;
  r.xprime = gamma_process(raw);
  const CoordMap coords = make_coord_map(raw.height(), raw.width());
  r.xtilde = isp.has_preprocess() ? preprocess_forward(r.xprime, coords, isp.params, isp.cfg.pre, "pre.") : r.xprime;
  if (color_image != nullptr) {
    require_same_dims(raw, *color_image, "infer color image");
    r.c = *color_image;
  } else if (color != nullptr) {
    if (!color->has_color()) throw StateError("color checkpoint holds no color predictor");
    r.c = models::color_predictor_forward(raw, coords, color->params, color->cfg.unet, "color.").color;
  } else if (isp.has_color()) {
    r.c = models::color_predictor_forward(raw, coords, isp.params, isp.cfg.unet, "color.").color;
  } else if (isp.cfg.color_source() == ColorSource::NoColorPred) {
    r.c = RgbImage(raw.height(), raw.width());
  } else {
    throw ParameterError("inference needs a color predictor checkpoint or a low-resolution color image");
  }
  r.chat = color_condition(isp, r.xtilde, r.c);
  r.yhat = models::ispnet_forward(raw, r.chat, isp.params, isp.cfg.isp, "isp.");
  return r;
}

EvalReport evaluate_isp(const TrainState& isp, const std::vector<PreparedSample>& test) {
  EvalReport rep;
  for (const PreparedSample& s : test) {
    if (s.gt_flow.empty()) throw ParameterError("evaluation sample '" + s.id + "' has no ground-truth flow");
    const InferenceResult r = infer(s.raw, isp, nullptr, &s.c);
    rep.add(eval_aligned(r.yhat, s.target, &s.gt_flow, s.id));
  }
  return rep;
}

}  // namespace ispw::train

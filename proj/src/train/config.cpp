#include <set>

#include "ispw/errors.hpp"
#include "ispw/train.hpp"

namespace ispw::train {

using nlohmann::json;

std::string_view align_name(AlignMode m) {
  switch (m) {
    case AlignMode::NoAlign: return "no_align";
    case AlignMode::AlignedLoss: return "aligned_loss";
    case AlignMode::Mask: return "mask";
  }
  return "?";
}

AlignMode parse_align(std::string_view name) {
  if (name == "no_align" || name == "NoAlign") return AlignMode::NoAlign;
  if (name == "aligned_loss" || name == "AlignedLoss") return AlignMode::AlignedLoss;
  if (name == "mask" || name == "Mask") return AlignMode::Mask;
  throw ParameterError("unknown alignment mode '" + std::string(name) + "' (no_align, aligned_loss, mask)");
}

ColorSource TrainConfig::color_source() const {
  if (color_variant == "no_color_pred" || color_variant == "NoColorPred") return ColorSource::NoColorPred;
  if (parse_variant(color_variant) == ColorMapVariant::ColorBlur) return ColorSource::ColorBlur;
  return ColorSource::Fit;
}

ColorMapVariant TrainConfig::fit_variant() const {
  if (color_source() == ColorSource::NoColorPred) throw StateError("no_color_pred has no color-map variant");
  return parse_variant(color_variant);
}

ColorMapOptions TrainConfig::colormap_options() const {
  ColorMapOptions o;
  o.variant = fit_variant();
  o.bins = bins;
  o.temperature = temperature;
  return o;
}

void TrainConfig::validate() const {
  if (steps == 0) throw ParameterError("steps must be positive");
  if (batch == 0) throw ParameterError("batch must be positive");
  if (threads == 0) throw ParameterError("threads must be positive");
  if (crop != 0 && crop % 2 != 0) throw ParameterError("crop must be even, got " + std::to_string(crop));
  if (bins < 1) throw ParameterError("bins must be >= 1");
  if (!(jitter_range >= 0.0 && jitter_range < 1.0)) throw ParameterError("jitter_range must be in [0, 1)");
  if (!(adam.lr >= 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.eps > 0.0)) {
    throw ParameterError("invalid Adam hyperparameters");
  }
  if (pre.layers < 1 || pre.hidden < 1) throw ParameterError("pre.layers and pre.hidden must be positive");
  color_source();
  weights.validate();
  isp.validate();
  unet.validate();
}

json config_to_json(const TrainConfig& c) {
  return json{
      {"seed", c.seed},
      {"steps", c.steps},
      {"batch", c.batch},
      {"crop", c.crop},
      {"threads", c.threads},
      {"align", align_name(c.align)},
      {"color_variant", c.color_variant},
      {"bins", c.bins},
      {"temperature", c.temperature},
      {"preprocess", c.preprocess},
      {"augment", c.augment},
      {"jitter", c.jitter},
      {"jitter_range", c.jitter_range},
      {"lr_schedule", c.lr_schedule},
      {"weights",
       {{"pred", c.weights.pred},
        {"map", c.weights.map},
        {"constraint", c.weights.constraint},
        {"clr_pred", c.weights.clr_pred},
        {"reconstruct", c.weights.reconstruct}}},
      {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
      {"mask", {{"alpha1", c.mask.alpha1}, {"alpha2", c.mask.alpha2}, {"displaced", c.mask.displaced}}},
      {"pre", {{"layers", c.pre.layers}, {"hidden", c.pre.hidden}}},
      {"isp", {{"rrdb_blocks", c.isp.rrdb_blocks}, {"channels", c.isp.channels}, {"growth", c.isp.growth}}},
      {"unet",
       {{"channels", c.unet.channels},
        {"latent_count", c.unet.latent_count},
        {"latent_dim", c.unet.latent_dim},
        {"heads", c.unet.heads},
        {"self_attn_layers", c.unet.self_attn_layers},
        {"global_context", c.unet.global_context},
        {"reconstruct", c.unet.reconstruct},
        {"rrdb_growth", c.unet.rrdb_growth}}},
      {"checkpoint_every", c.checkpoint_every},
      {"log_every", c.log_every},
  };
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError("config" + where() + " must be a JSON object");
  }

  template <class V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const json::exception&) {
      throw ParameterError("config key '" + path_ + key + "' has the wrong type");
    }
  }

  Reader sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    static const json empty = json::object();
    return Reader(it == j_.end() ? empty : *it, path_ + key + ".");
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ParameterError("unknown config key '" + path_ + it.key() + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "" : " section '" + path_.substr(0, path_.size() - 1) + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

TrainConfig config_from_json(const json& j, TrainConfig c) {
  Reader r(j, "");
  r.get("seed", c.seed);
  r.get("steps", c.steps);
  r.get("batch", c.batch);
  r.get("crop", c.crop);
  r.get("threads", c.threads);
  std::string align(align_name(c.align));
  r.get("align", align);
  c.align = parse_align(align);
  r.get("color_variant", c.color_variant);
  r.get("bins", c.bins);
  r.get("temperature", c.temperature);
  r.get("preprocess", c.preprocess);
  r.get("augment", c.augment);
  r.get("jitter", c.jitter);
  r.get("jitter_range", c.jitter_range);
  r.get("lr_schedule", c.lr_schedule);
  {
    Reader w = r.sub("weights");
    w.get("pred", c.weights.pred);
    w.get("map", c.weights.map);
    w.get("constraint", c.weights.constraint);
    w.get("clr_pred", c.weights.clr_pred);
    w.get("reconstruct", c.weights.reconstruct);
    w.finish();
  }
  {
    Reader a = r.sub("adam");
    a.get("lr", c.adam.lr);
    a.get("beta1", c.adam.beta1);
    a.get("beta2", c.adam.beta2);
    a.get("eps", c.adam.eps);
    a.finish();
  }
  {
    Reader m = r.sub("mask");
    m.get("alpha1", c.mask.alpha1);
    m.get("alpha2", c.mask.alpha2);
    m.get("displaced", c.mask.displaced);
    m.finish();
  }
  {
    Reader p = r.sub("pre");
    p.get("layers", c.pre.layers);
    p.get("hidden", c.pre.hidden);
    p.finish();
  }
  {
    Reader f = r.sub("isp");
    f.get("rrdb_blocks", c.isp.rrdb_blocks);
    f.get("channels", c.isp.channels);
    f.get("growth", c.isp.growth);
    f.finish();
  }
  {
    Reader u = r.sub("unet");
    u.get("channels", c.unet.channels);
    u.get("latent_count", c.unet.latent_count);
    u.get("latent_dim", c.unet.latent_dim);
    u.get("heads", c.unet.heads);
    u.get("self_attn_layers", c.unet.self_attn_layers);
    u.get("global_context", c.unet.global_context);
    u.get("reconstruct", c.unet.reconstruct);
    u.get("rrdb_growth", c.unet.rrdb_growth);
    u.finish();
  }
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("log_every", c.log_every);
  r.finish();
  return c;
}

}  // namespace ispw::train

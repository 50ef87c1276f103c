#include "ispw/models/networks.hpp"

namespace ispw::models {

GctConfig UNetConfig::gct(std::size_t level) const {
  GctConfig g;
  g.latent_count = latent_count.at(level);
  g.latent_dim = latent_dim.at(level);
  g.heads = heads;
  g.self_attn_layers = self_attn_layers;
  g.input_dim = channels.at(level);
  return g;
}

void UNetConfig::validate() const {
  if (channels.empty()) throw ParameterError("unet: at least one level required");
  if (latent_count.size() != channels.size() || latent_dim.size() != channels.size()) {
    throw ParameterError("unet: latent_count and latent_dim need one entry per level (" +
                         std::to_string(channels.size()) + ")");
  }
  for (std::size_t c : channels) {
    if (c < 1) throw ParameterError("unet: channel counts must be >= 1");
  }
  if (global_context) {
    for (std::size_t l = 0; l < levels(); ++l) gct(l).validate();
  }
  if (rrdb_growth < 1) throw ParameterError("unet: rrdb_growth must be >= 1");
}

UNetConfig UNetConfig::full_scale() {
  UNetConfig c;
  c.channels.clear();
  c.latent_count.clear();
  c.latent_dim.clear();
  for (std::size_t l = 0; l < 4; ++l) {
    c.channels.push_back(64u << l);
    c.latent_count.push_back(1024u >> l);
    c.latent_dim.push_back(std::size_t(1) << (l + 7));
  }
  c.heads = 4;
  c.self_attn_layers = 2;
  c.rrdb_growth = 32;
  return c;
}

grad::ParamSet<float> init_color_predictor(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SplitMix64 rng(seed);
  grad::ParamSet<float> ps;
  const std::size_t L = cfg.levels();
  std::size_t in = 6;
  for (std::size_t l = 0; l < L; ++l) {
    const std::string e = "enc" + std::to_string(l);
    add_conv(ps, e + ".conv0", in, cfg.channels[l], 3, rng);
    add_conv(ps, e + ".conv1", cfg.channels[l], cfg.channels[l], 3, rng);
    if (cfg.global_context) add_gct(ps, e + ".gct", cfg.gct(l), rng);
    in = cfg.channels[l];
  }
  std::vector<std::string> branches{"dslr"};
  if (cfg.reconstruct) branches.push_back("phone");
  for (const auto& br : branches) {
    for (std::size_t l = L; l-- > 0;) {
      const std::string d = br + ".dec" + std::to_string(l);
      const std::size_t below = l + 1 == L ? cfg.channels[L - 1] : cfg.channels[l + 1];
      ps.add(d + ".up.w", grad::init::kaiming_uniform<float>({below, cfg.channels[l], 2, 2}, below, rng));
      ps.add(d + ".up.b", Tensor<float>({cfg.channels[l]}));
      add_conv(ps, d + ".conv0", 2 * cfg.channels[l], cfg.channels[l], 3, rng);
      add_conv(ps, d + ".conv1", cfg.channels[l], cfg.channels[l], 3, rng);
    }
  }
  add_rrdb(ps, "dslr.head.rrdb", cfg.channels[0], cfg.rrdb_growth, rng);
  add_conv(ps, "dslr.head.out", cfg.channels[0], 3, 3, rng, 0.5);
  if (cfg.reconstruct) add_conv(ps, "phone.head.out", cfg.channels[0], 4, 3, rng, 0.5);
  return ps;
}

namespace {

template <class T>
Var<T> decode(const Scope<T>& s, Var<T> bottom, const std::vector<Var<T>>& skips, const UNetConfig& cfg) {
  Var<T> h = bottom;
  for (std::size_t l = cfg.levels(); l-- > 0;) {
    const Scope<T> d = s.sub("dec" + std::to_string(l));
    Var<T> up = grad::conv_transpose2x2(h, d.p("up.w"), d.p("up.b"));
    h = grad::concat_channels<T>({up, skips[l]});
    h = conv_lrelu(d, "conv0", h);
    h = conv_lrelu(d, "conv1", h);
  }
  return h;
}

}  // namespace

template <class T>
ColorPrediction<T> color_predictor(const Scope<T>& s, Var<T> raw, Var<T> coords, const UNetConfig& cfg) {
  cfg.validate();
  const grad::Shape rs = raw.shape();
  if (rs.size() != 3 || rs[0] != 4) throw DimensionError("color_predictor: RAW must be [4,H,W], got " + grad::shape_str(rs));
  if (coords.shape() != grad::Shape{2, rs[1], rs[2]}) {
    throw DimensionError("color_predictor: coordinate map " + grad::shape_str(coords.shape()) + " does not match RAW " +
                         grad::shape_str(rs));
  }
  const std::size_t L = cfg.levels();
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t f = std::size_t(1) << l;
    if (rs[1] % f != 0 || rs[2] % f != 0) {
      throw DimensionError("color_predictor: RAW " + std::to_string(rs[1]) + "x" + std::to_string(rs[2]) +
                           " cannot be pooled at level " + std::to_string(l - 1) + " (needs divisibility by " +
                           std::to_string(std::size_t(1) << L) + ")");
    }
  }
  Var<T> h = grad::concat_channels<T>({raw, coords});
  std::vector<Var<T>> skips;
  for (std::size_t l = 0; l < L; ++l) {
    const Scope<T> e = s.sub("enc" + std::to_string(l));
    h = conv_lrelu(e, "conv0", h);
    h = conv_lrelu(e, "conv1", h);
    if (cfg.global_context) h = gct_forward(e.sub("gct"), h, cfg.gct(l));
    skips.push_back(h);
    h = grad::avg_pool_2x2(h);
  }
  ColorPrediction<T> out;
  const Scope<T> dslr = s.sub("dslr");
  Var<T> dc = decode(dslr, h, skips, cfg);
  dc = rrdb(dslr.sub("head.rrdb"), dc);
  out.color = conv(dslr, "head.out", dc);
  if (cfg.reconstruct) {
    const Scope<T> phone = s.sub("phone");
    out.recon = conv(phone, "head.out", decode(phone, h, skips, cfg));
  }
  return out;
}

template ColorPrediction<float> color_predictor(const Scope<float>&, Var<float>, Var<float>, const UNetConfig&);
template ColorPrediction<double> color_predictor(const Scope<double>&, Var<double>, Var<double>, const UNetConfig&);

ColorPredictionImages color_predictor_forward(const RawImage& raw, const CoordMap& coords,
                                              const grad::ParamSet<float>& params, const UNetConfig& cfg,
                                              const std::string& prefix) {
  require_same_dims(raw, coords, "color_predictor_forward");
  Tape<float> tape;
  Scope<float> s{tape, params, prefix};
  auto out = color_predictor(s, tape.constant(grad::from_image<float>(raw)), tape.constant(grad::from_image<float>(coords)), cfg);
  ColorPredictionImages img{grad::to_image<RgbImage>(out.color.value()), RawImage()};
  if (out.recon.valid()) img.recon = grad::to_image<RawImage>(out.recon.value());
  return img;
}

}  // namespace ispw::models

#include "ispw/models/networks.hpp"

namespace ispw::models {

void IspNetConfig::validate() const {
  if (channels < 1 || growth < 1) throw ParameterError("ispnet: channels and growth must be >= 1");
}

IspNetConfig IspNetConfig::full_scale() { return {8, 64, 32}; }

grad::ParamSet<float> init_ispnet(const IspNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SplitMix64 rng(seed);
  grad::ParamSet<float> ps;
  add_conv(ps, "in", 7, cfg.channels, 3, rng);
  for (std::size_t b = 0; b < cfg.rrdb_blocks; ++b) add_rrdb(ps, "rrdb" + std::to_string(b), cfg.channels, cfg.growth, rng);
  add_conv(ps, "up", cfg.channels, cfg.channels, 3, rng);
  add_conv(ps, "out", cfg.channels, 3, 3, rng, 0.5);
  return ps;
}

template <class T>
Var<T> ispnet(const Scope<T>& s, Var<T> raw, Var<T> chat, const IspNetConfig& cfg) {
  const grad::Shape rs = raw.shape();
  if (rs.size() != 3 || rs[0] != 4) throw DimensionError("ispnet: RAW must be [4,H,W], got " + grad::shape_str(rs));
  if (chat.shape() != grad::Shape{3, rs[1], rs[2]}) {
    throw DimensionError("ispnet: color " + grad::shape_str(chat.shape()) + " does not match RAW " + grad::shape_str(rs));
  }
  Var<T> h = conv(s, "in", grad::concat_channels<T>({raw, chat}));
  for (std::size_t b = 0; b < cfg.rrdb_blocks; ++b) h = rrdb(s.sub("rrdb" + std::to_string(b)), h);
  h = conv_lrelu(s, "up", grad::upsample_nearest_2x(h));
  return conv(s, "out", h);
}

template Var<float> ispnet(const Scope<float>&, Var<float>, Var<float>, const IspNetConfig&);
template Var<double> ispnet(const Scope<double>&, Var<double>, Var<double>, const IspNetConfig&);

RgbImage ispnet_forward(const RawImage& raw, const RgbImage& chat, const grad::ParamSet<float>& params,
                        const IspNetConfig& cfg, const std::string& prefix) {
  require_same_dims(raw, chat, "ispnet_forward");
  Tape<float> tape;
  Scope<float> s{tape, params, prefix};
  auto y = ispnet(s, tape.constant(grad::from_image<float>(raw)), tape.constant(grad::from_image<float>(chat)), cfg);
  return grad::to_image<RgbImage>(y.value());
}

}  // namespace ispw::models

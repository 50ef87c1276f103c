#include "ispw/rawproc.hpp"

#include <algorithm>
#include <cmath>

namespace ispw {

RgbImage gamma_process(const RawImage& raw, const GammaConstants& k) {
  if (!(k.gamma > 0.0) || !(k.floor_r > 0.0) || !(k.floor_g > 0.0) || !(k.floor_b > 0.0)) {
    throw ParameterError("gamma_process: floors and gamma must be positive");
  }
  RgbImage out(raw.height(), raw.width());
  const std::size_t src_plane[3] = {0, 1, 3};
  const double floors[3] = {k.floor_r, k.floor_g, k.floor_b};
  const double inv_gamma = 1.0 / k.gamma;
  for (std::size_t c = 0; c < 3; ++c) {
    auto in = raw.plane(src_plane[c]);
    float mx = 0.0f;
    for (float v : in) {
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw DomainError("gamma_process: RAW plane " + std::to_string(src_plane[c]) +
                          " contains a negative or non-finite value");
      }
      mx = std::max(mx, v);
    }
    const double div = std::max(double(mx), floors[c]);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < in.size(); ++i) {
      dst[i] = static_cast<float>(std::clamp(std::pow(double(in[i]) / div, inv_gamma), 0.0, 1.0));
    }
  }
  return out;
}

grad::ParamSet<float> init_preprocess(const PreprocessConfig& cfg, std::uint64_t seed) {
  if (cfg.layers < 1 || cfg.hidden < 1) throw ParameterError("preprocess: layers and hidden must be >= 1");
  SplitMix64 rng(seed);
  grad::ParamSet<float> ps;
  std::size_t in = 5;
  for (int l = 0; l < cfg.layers; ++l) {
    const bool last = l + 1 == cfg.layers;
    const std::size_t out = last ? 3 : std::size_t(cfg.hidden);
    models::add_conv(ps, "conv" + std::to_string(l), in, out, 3, rng, last ? 0.1 : 1.0);
    in = out;
  }
  return ps;
}

template <class T>
grad::Var<T> noise_estimate(const models::Scope<T>& s, grad::Var<T> xprime, grad::Var<T> coords,
                            const PreprocessConfig& cfg) {
  if (xprime.shape().size() != 3 || xprime.shape()[0] != 3) {
    throw DimensionError("preprocess: x' must be [3,H,W], got " + grad::shape_str(xprime.shape()));
  }
  if (coords.shape() != grad::Shape{2, xprime.shape()[1], xprime.shape()[2]}) {
    throw DimensionError("preprocess: coordinate map " + grad::shape_str(coords.shape()) + " does not match x' " +
                         grad::shape_str(xprime.shape()));
  }
  grad::Var<T> h = grad::concat_channels<T>({xprime, coords});
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string name = "conv" + std::to_string(l);
    h = l + 1 == cfg.layers ? models::conv(s, name, h) : models::conv_lrelu(s, name, h);
  }
  return h;
}

template <class T>
grad::Var<T> preprocess(const models::Scope<T>& s, grad::Var<T> xprime, grad::Var<T> coords,
                        const PreprocessConfig& cfg) {
  return grad::sub(xprime, noise_estimate(s, xprime, coords, cfg));
}

template grad::Var<float> noise_estimate(const models::Scope<float>&, grad::Var<float>, grad::Var<float>,
                                         const PreprocessConfig&);
template grad::Var<double> noise_estimate(const models::Scope<double>&, grad::Var<double>, grad::Var<double>,
                                          const PreprocessConfig&);
template grad::Var<float> preprocess(const models::Scope<float>&, grad::Var<float>, grad::Var<float>,
                                     const PreprocessConfig&);
template grad::Var<double> preprocess(const models::Scope<double>&, grad::Var<double>, grad::Var<double>,
                                      const PreprocessConfig&);

RgbImage preprocess_forward(const RgbImage& xprime, const CoordMap& coords, const grad::ParamSet<float>& params,
                            const PreprocessConfig& cfg, const std::string& prefix) {
  require_same_dims(xprime, coords, "preprocess_forward");
  grad::Tape<float> tape;
  models::Scope<float> s{tape, params, prefix};
  auto x = tape.constant(grad::from_image<float>(xprime));
  auto c = tape.constant(grad::from_image<float>(coords));
  return grad::to_image<RgbImage>(preprocess(s, x, c, cfg).value());
}

}  // namespace ispw

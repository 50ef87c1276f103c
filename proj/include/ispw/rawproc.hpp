#pragma once

// RAW visualization and the learned pre-processing network.

#include "ispw/grad/ops.hpp"
#include "ispw/image.hpp"
#include "ispw/models/layers.hpp"

namespace ispw {

/// Per-channel normalization floors and gamma of the RAW visualization.
struct GammaConstants {
  double floor_r = 1.0 / 2.5;
  double floor_g = 1.0;
  double floor_b = 1.0 / 1.4;
  double gamma = 2.2;
};

/// x' = clamp((x / max(x_max, floor))^(1/gamma)) on planes R, Gr, B; Gb is dropped.
RgbImage gamma_process(const RawImage& raw, const GammaConstants& k = {});

struct PreprocessConfig {
  int layers = 3;
  int hidden = 16;
};

/// Parameters `conv0` .. `conv{layers-1}` of the noise estimator. The last
/// layer starts at a tenth of the usual scale so x~ begins close to x'.
grad::ParamSet<float> init_preprocess(const PreprocessConfig& cfg, std::uint64_t seed);

/// eta(concat(x', coords)): 5 input channels, 3 output channels.
template <class T>
grad::Var<T> noise_estimate(const models::Scope<T>& s, grad::Var<T> xprime, grad::Var<T> coords,
                            const PreprocessConfig& cfg);

/// x~ = x' - eta(concat(x', coords)).
template <class T>
grad::Var<T> preprocess(const models::Scope<T>& s, grad::Var<T> xprime, grad::Var<T> coords,
                        const PreprocessConfig& cfg);

RgbImage preprocess_forward(const RgbImage& xprime, const CoordMap& coords, const grad::ParamSet<float>& params,
                            const PreprocessConfig& cfg, const std::string& prefix = "");

}  // namespace ispw

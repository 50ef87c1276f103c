#pragma once

// Training losses, augmentation, Adam with step-halving schedule, and the
// run configuration shared by the training loops and the CLI.

#include <array>
#include <cstdint>
#include <json.hpp>
#include <string>

#include "ispw/colormap.hpp"
#include "ispw/flowwarp.hpp"
#include "ispw/grad/ops.hpp"
#include "ispw/models/networks.hpp"
#include "ispw/rawproc.hpp"

namespace ispw::train {

using grad::ParamSet;
using grad::Tensor;
using grad::Var;

// ---- Losses ----

/// Masked L1 between the prediction and the aligned target; mask is the
/// 2x-upsampled consistency mask. An all-zero mask gives 0 and a warning event.
template <class T>
Var<T> loss_isp(Var<T> yhat, Var<T> y_aligned, const Tensor<T>& mask_up);

template <class T>
struct PreprocessLosses {
  Var<T> map;         // masked L1 between the mapped colors and the aligned target
  Var<T> constraint;  // L1 between blur(x~) and blur(x')
};

/// `chat` is colormap_apply(x~, fit) recorded on the same tape as `xt`.
template <class T>
PreprocessLosses<T> loss_preprocess(Var<T> chat, Var<T> xt, Var<T> xprime, Var<T> c_aligned, const Tensor<T>& mask,
                                    int blur_size = 9, double blur_sigma = 2.0);

template <class T>
struct ColorLosses {
  Var<T> clr_pred;     // masked L1 on the predicted low-resolution color image
  Var<T> reconstruct;  // unmasked L1 between the reconstructed and input RAW
};

template <class T>
ColorLosses<T> loss_color_predictor(Var<T> color, Var<T> c_aligned, const Tensor<T>& mask, Var<T> recon, Var<T> raw);

struct LossWeights {
  double pred = 1.0;
  double map = 1.0;
  double constraint = 1.0;
  double clr_pred = 1.0;
  double reconstruct = 1.0;

  void validate() const;
};

// ---- Augmentation ----

struct ColorJitter {
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  /// Fraction of pi radians.
  double hue = 0.0;
};

/// Each offset uniform in [-range, range], drawn in the order brightness,
/// contrast, saturation, hue.
ColorJitter random_jitter(SplitMix64& rng, double range = 0.2);

/// Applies brightness, contrast (about the global mean), saturation (toward
/// per-pixel luma) and hue (rotation of the YIQ chroma plane), then clamps.
RgbImage color_jitter(const RgbImage& y, const ColorJitter& j);
RgbImage color_jitter(const RgbImage& y, std::uint64_t seed, double range = 0.2);

/// One of the 8 flip/rotation symmetries of the square: bit 0 transposes,
/// bit 1 flips rows, bit 2 flips columns.
template <std::size_t C, class Tag>
PlanarImage<C, Tag> dihedral(const PlanarImage<C, Tag>& img, unsigned code) {
  const bool tr = code & 1u, fr = code & 2u, fc = code & 4u;
  const std::size_t h = tr ? img.width() : img.height(), w = tr ? img.height() : img.width();
  PlanarImage<C, Tag> out(h, w);
  for (std::size_t ch = 0; ch < C; ++ch) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t rr = fr ? h - 1 - r : r, cc = fc ? w - 1 - c : c;
        out.at(ch, r, c) = tr ? img.at(ch, cc, rr) : img.at(ch, rr, cc);
      }
    }
  }
  return out;
}

// ---- Optimization ----

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  ParamSet<float> m;
  ParamSet<float> v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam; moments are created on first use. Grad entries must
/// name existing parameters with matching shapes.
void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state, const AdamConfig& cfg,
               double lr_multiplier = 1.0);

/// 1 before 50% of training, halved at 50%, 75%, 90% and 95%.
double lr_multiplier(std::size_t epoch, std::size_t total_epochs);

// ---- Configuration ----

enum class AlignMode { NoAlign, AlignedLoss, Mask };
std::string_view align_name(AlignMode m);
AlignMode parse_align(std::string_view name);

/// How the color conditioning c^ of F is formed during training.
enum class ColorSource { Fit, ColorBlur, NoColorPred };

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 200;
  std::size_t batch = 4;
  /// RAW crop side; targets use twice this. 0 trains on whole images.
  std::size_t crop = 16;
  std::size_t threads = 1;
  AlignMode align = AlignMode::Mask;
  /// Color-map variant name, or "no_color_pred".
  std::string color_variant = "affine_dep";
  int bins = 15;
  double temperature = 0.0;
  bool preprocess = true;
  bool augment = true;
  bool jitter = true;
  double jitter_range = 0.2;
  bool lr_schedule = true;
  LossWeights weights;
  AdamConfig adam;
  FbMaskOptions mask;
  PreprocessConfig pre;
  models::IspNetConfig isp;
  models::UNetConfig unet;
  std::size_t checkpoint_every = 0;
  std::size_t log_every = 10;

  ColorSource color_source() const;
  /// Fit variant; only meaningful when color_source() == Fit.
  ColorMapVariant fit_variant() const;
  ColorMapOptions colormap_options() const;
  /// P takes part only when c^ comes from a fitted map.
  bool uses_preprocess() const { return preprocess && color_source() == ColorSource::Fit; }
  void validate() const;
};

nlohmann::json config_to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys raise ParameterError.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace ispw::train

#pragma once

// Parametric color mapping: soft intensity bins per channel, closed-form
// weighted least-squares fits per bin, and the ablation variants.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ispw/grad/tape.hpp"
#include "ispw/image.hpp"

namespace ispw {

enum class ColorMapVariant { Linear3x3, ConstVal, AffineIndep, AffineDep, ColorBlur };

std::string_view variant_name(ColorMapVariant v);
/// Accepts snake_case names (affine_dep) and the ablation names (AffineMapDep, LinearMap, ...).
ColorMapVariant parse_variant(std::string_view name);

struct ColorMapModel {
  ColorMapVariant variant = ColorMapVariant::AffineDep;
  int bins = 15;
  double temperature = 1.0 / 225.0;
  std::size_t height = 0;
  std::size_t width = 0;
  bool fitted = false;
  /// centroids[j][b].
  std::array<std::vector<double>, 3> centroids;
  /// AffineDep: [j][b][4] = (A1, A2, A3, B); AffineIndep: [j][b][2] = (a, b);
  /// ConstVal: [j][b]; Linear3x3: row-major M; ColorBlur: the blurred target, planar.
  std::vector<double> params;
  int blur_size = 9;
  double blur_sigma = 2.0;

  std::size_t params_per_bin() const;
};

struct ColorMapOptions {
  ColorMapVariant variant = ColorMapVariant::AffineDep;
  int bins = 15;
  /// <= 0 selects (1/bins)^2.
  double temperature = 0.0;
  int blur_size = 9;
  double blur_sigma = 2.0;
};

/// Bin centers of an equal partition of [min_j, max_j] per channel.
std::array<std::vector<double>, 3> make_bins(const RgbImage& xt, int bins);

enum class WeightAxis { OverBins, OverPixels };

/// Row-major N x B soft assignment weights for each output channel.
struct BinWeights {
  WeightAxis axis = WeightAxis::OverBins;
  std::size_t pixels = 0;
  std::size_t bins = 0;
  std::array<std::vector<double>, 3> w;
  double at(std::size_t j, std::size_t i, std::size_t b) const { return w[j][i * bins + b]; }
};

BinWeights soft_weights(const RgbImage& xt, const ColorMapModel& model, WeightAxis axis);

/// `mask`, when given, weights each pixel of the fit; zero-mask pixels are ignored.
ColorMapModel fit(const RgbImage& xt, const RgbImage& c, const ColorMapOptions& opt = {},
                  const MaskImage* mask = nullptr);
RgbImage apply(const RgbImage& xt, const ColorMapModel& model);

/// Gradient of sum(g * apply(xt, model)) with respect to xt, model held fixed.
RgbImage apply_vjp(const RgbImage& xt, const ColorMapModel& model, const RgbImage& g);

/// Tape op c^ = apply(x~, model) whose backward is apply_vjp (the fit is data).
template <class T>
grad::Var<T> colormap_apply(grad::Var<T> xt, const ColorMapModel& model);

/// Mean absolute residual of apply(fit) against c.
double fit_residual_l1(const RgbImage& xt, const RgbImage& c, const ColorMapModel& model);

std::string model_to_json(const ColorMapModel& model);
ColorMapModel model_from_json(const std::string& text);
void save_model(const std::string& path, const ColorMapModel& model);
ColorMapModel load_model(const std::string& path);

namespace base64 {
std::string encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> decode(std::string_view text);
}  // namespace base64

}  // namespace ispw

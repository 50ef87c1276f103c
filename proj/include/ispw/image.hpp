#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ispw/errors.hpp"

namespace ispw {

/// Planar float image: `Channels` planes of height x width, row-major.
/// The tag makes RGB, RAW, masks, coordinates and flows distinct types even
/// when their channel counts coincide.
template <std::size_t Channels, class Tag>
class PlanarImage {
 public:
  static constexpr std::size_t kChannels = Channels;

  PlanarImage() = default;

  PlanarImage(std::size_t height, std::size_t width, float fill = 0.0f)
      : height_(height), width_(width), data_(Channels * height * width, fill) {
    if (height == 0 || width == 0) {
      throw DimensionError("image dimensions must be >= 1, got " + std::to_string(height) + "x" +
                           std::to_string(width));
    }
  }

  PlanarImage(std::size_t height, std::size_t width, std::vector<float> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (height == 0 || width == 0) {
      throw DimensionError("image dimensions must be >= 1");
    }
    if (data_.size() != Channels * height * width) {
      throw DimensionError("image payload has " + std::to_string(data_.size()) + " values, expected " +
                           std::to_string(Channels * height * width));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& at(std::size_t c, std::size_t r, std::size_t col) { return data_[(c * height_ + r) * width_ + col]; }
  float at(std::size_t c, std::size_t r, std::size_t col) const {
    return data_[(c * height_ + r) * width_ + col];
  }

  std::span<float> plane(std::size_t c) { return {data_.data() + c * pixels(), pixels()}; }
  std::span<const float> plane(std::size_t c) const { return {data_.data() + c * pixels(), pixels()}; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  const std::vector<float>& storage() const { return data_; }

  bool same_dims(std::size_t h, std::size_t w) const noexcept { return h == height_ && w == width_; }
  template <class Other>
  bool same_dims(const Other& o) const noexcept {
    return o.height() == height_ && o.width() == width_;
  }

  bool operator==(const PlanarImage&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

struct RgbTag {};
struct RawTag {};
struct MaskTag {};
struct CoordTag {};
struct FlowTag {};

using RgbImage = PlanarImage<3, RgbTag>;
/// Packed Bayer planes in order R, Gr, Gb, B at half the sensor resolution.
using RawImage = PlanarImage<4, RawTag>;
/// Binary mask, values exactly 0 or 1.
using MaskImage = PlanarImage<1, MaskTag>;
/// Plane 0: column coordinate in [-1,1]; plane 1: row coordinate in [-1,1].
using CoordMap = PlanarImage<2, CoordTag>;
/// Plane 0: horizontal displacement u (+right); plane 1: vertical v (+down), in pixels.
using FlowField = PlanarImage<2, FlowTag>;

template <class A, class B>
void require_same_dims(const A& a, const B& b, const char* what) {
  if (!a.same_dims(b)) {
    throw DimensionError(std::string(what) + ": dimension mismatch " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
  }
}

CoordMap make_coord_map(std::size_t height, std::size_t width);

/// Clamp every value into [lo, hi].
template <class Img>
Img clamped(Img img, float lo = 0.0f, float hi = 1.0f) {
  for (float& v : img.values()) v = std::clamp(v, lo, hi);
  return img;
}

template <class Img>
bool all_finite(const Img& img) {
  return std::all_of(img.values().begin(), img.values().end(), [](float v) { return std::isfinite(v); });
}

/// Mask with every pixel set to 1.
inline MaskImage full_mask(std::size_t height, std::size_t width) { return MaskImage(height, width, 1.0f); }

}  // namespace ispw

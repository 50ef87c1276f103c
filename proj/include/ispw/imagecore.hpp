#pragma once

// Resampling, blurring and file I/O for planar images.

#include <string>
#include <vector>

#include "ispw/image.hpp"

namespace ispw {

namespace detail {
void downsample_plane_2x(std::span<const float> in, std::size_t h, std::size_t w, std::span<float> out);
void upsample_plane_2x(std::span<const float> in, std::size_t h, std::size_t w, std::span<float> out);
void blur_plane(std::span<const float> in, std::size_t h, std::size_t w, const std::vector<float>& kernel,
                std::span<float> out);
}  // namespace detail

/// Each output pixel is the mean of its 2x2 source block.
template <std::size_t C, class Tag>
PlanarImage<C, Tag> downsample_bilinear_2x(const PlanarImage<C, Tag>& img) {
  if (img.height() % 2 != 0 || img.width() % 2 != 0) {
    throw DimensionError("downsample_bilinear_2x: dimensions must be even, got " + std::to_string(img.height()) +
                         "x" + std::to_string(img.width()));
  }
  PlanarImage<C, Tag> out(img.height() / 2, img.width() / 2);
  for (std::size_t c = 0; c < C; ++c) {
    detail::downsample_plane_2x(img.plane(c), img.height(), img.width(), out.plane(c));
  }
  return out;
}

/// out[r][c] = in[r/2][c/2].
template <std::size_t C, class Tag>
PlanarImage<C, Tag> upsample_nearest_2x(const PlanarImage<C, Tag>& img) {
  PlanarImage<C, Tag> out(img.height() * 2, img.width() * 2);
  for (std::size_t c = 0; c < C; ++c) {
    detail::upsample_plane_2x(img.plane(c), img.height(), img.width(), out.plane(c));
  }
  return out;
}

/// The h x w window with top-left corner (row, col).
template <std::size_t C, class Tag>
PlanarImage<C, Tag> crop(const PlanarImage<C, Tag>& img, std::size_t row, std::size_t col, std::size_t h,
                         std::size_t w) {
  if (row + h > img.height() || col + w > img.width()) {
    throw DimensionError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                         std::to_string(row) + ", " + std::to_string(col) + ") exceeds " +
                         std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  PlanarImage<C, Tag> out(h, w);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t k = 0; k < w; ++k) out.at(c, r, k) = img.at(c, row + r, col + k);
    }
  }
  return out;
}

/// Normalized 1-D Gaussian taps; `size` must be odd and `sigma` positive.
std::vector<float> gaussian_kernel(int size, double sigma);

/// Separable Gaussian blur with replicate borders.
template <std::size_t C, class Tag>
PlanarImage<C, Tag> gaussian_blur(const PlanarImage<C, Tag>& img, int size = 9, double sigma = 2.0) {
  const auto kernel = gaussian_kernel(size, sigma);
  PlanarImage<C, Tag> out(img.height(), img.width());
  for (std::size_t c = 0; c < C; ++c) {
    detail::blur_plane(img.plane(c), img.height(), img.width(), kernel, out.plane(c));
  }
  return out;
}

/// Threshold at 0.5 into a binary mask.
MaskImage binarize(const MaskImage& m);

/// Bilinear sample of one plane at fractional (x = column, y = row) with
/// replicate-clamped borders.
float sample_bilinear(std::span<const float> plane, std::size_t h, std::size_t w, double x, double y);

// P6 binary PPM, maxval 255. Values quantized as round(v * 255) after clamping.
RgbImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& img);
RgbImage decode_ppm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);

// P5 binary PGM for masks; 0 <-> 0, 1 <-> 255 (reads threshold at 128).
MaskImage read_pgm_mask(const std::string& path);
void write_pgm_mask(const std::string& path, const MaskImage& mask);

// RAW4 container: "RAW4", u32 LE height, u32 LE width, 4*H*W f32 LE planar (R, Gr, Gb, B).
RawImage read_raw4(const std::string& path);
void write_raw4(const std::string& path, const RawImage& raw);
RawImage decode_raw4(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_raw4(const RawImage& raw);

}  // namespace ispw

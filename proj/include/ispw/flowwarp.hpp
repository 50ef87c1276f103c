#pragma once

// Dense flow warping, forward-backward consistency masks and .flo I/O.

#include <string>
#include <utility>

#include "ispw/imagecore.hpp"

namespace ispw {

/// out(p) = bilinear sample of img at p + flow(p), replicate-clamped.
template <std::size_t C, class Tag>
PlanarImage<C, Tag> warp(const PlanarImage<C, Tag>& img, const FlowField& flow) {
  require_same_dims(img, flow, "warp");
  const std::size_t h = img.height(), w = img.width();
  PlanarImage<C, Tag> out(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double x = double(c) + flow.at(0, r, c);
      const double y = double(r) + flow.at(1, r, c);
      for (std::size_t ch = 0; ch < C; ++ch) out.at(ch, r, c) = sample_bilinear(img.plane(ch), h, w, x, y);
    }
  }
  return out;
}

struct FbMaskOptions {
  double alpha1 = 0.01;
  double alpha2 = 0.5;
  /// Sample the backward flow at p + fwd(p) instead of at p.
  bool displaced = false;
};

/// m(p) = 1 iff |fwd + bwd|^2 < alpha1 (|fwd|^2 + |bwd|^2) + alpha2.
MaskImage fb_mask(const FlowField& fwd, const FlowField& bwd, const FbMaskOptions& opt = {});

/// Flow at twice the resolution: nearest-neighbor upsampled, vectors doubled.
FlowField upsample_flow_2x(const FlowField& flow);

// Middlebury .flo: f32 202021.25, i32 width, i32 height, interleaved (u, v) f32.
FlowField read_flo(const std::string& path);
void write_flo(const std::string& path, const FlowField& flow);
std::vector<std::uint8_t> encode_flo(const FlowField& flow);
FlowField decode_flo(const std::vector<std::uint8_t>& bytes);

enum class SynthFlowKind { Translation, Rotation, Zoom };

struct SynthFlowParams {
  double tx = 0.0;
  double ty = 0.0;
  /// Radians, about the image center.
  double angle = 0.0;
  /// Zoom factor about the image center; must be positive.
  double scale = 1.0;
};

/// fwd(p) = g(p) - p for the parametric map g; bwd(p) = g^-1(p) - p.
std::pair<FlowField, FlowField> synth_flow(SynthFlowKind kind, const SynthFlowParams& params, std::size_t height,
                                           std::size_t width);
SynthFlowKind parse_flow_kind(const std::string& name);

}  // namespace ispw

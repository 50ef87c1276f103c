#include "ispw/flowwarp.hpp"

#include <cmath>

#include "ispw/binary_io.hpp"

namespace ispw {

namespace {
constexpr float kFloMagic = 202021.25f;
}

MaskImage fb_mask(const FlowField& fwd, const FlowField& bwd, const FbMaskOptions& opt) {
  require_same_dims(fwd, bwd, "fb_mask");
  const std::size_t h = fwd.height(), w = fwd.width();
  MaskImage m(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double fu = fwd.at(0, r, c), fv = fwd.at(1, r, c);
      double bu = bwd.at(0, r, c), bv = bwd.at(1, r, c);
      if (opt.displaced) {
        const double x = double(c) + fu, y = double(r) + fv;
        bu = sample_bilinear(bwd.plane(0), h, w, x, y);
        bv = sample_bilinear(bwd.plane(1), h, w, x, y);
      }
      const double su = fu + bu, sv = fv + bv;
      const double lhs = su * su + sv * sv;
      const double rhs = opt.alpha1 * ((fu * fu + fv * fv) + (bu * bu + bv * bv)) + opt.alpha2;
      m.at(0, r, c) = lhs < rhs ? 1.0f : 0.0f;
    }
  }
  return m;
}

FlowField upsample_flow_2x(const FlowField& flow) {
  FlowField out = upsample_nearest_2x(flow);
  for (float& v : out.values()) v *= 2.0f;
  return out;
}

std::vector<std::uint8_t> encode_flo(const FlowField& flow) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * flow.pixels());
  binio::put_f32(out, kFloMagic);
  binio::put_u32(out, static_cast<std::uint32_t>(flow.width()));
  binio::put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (std::size_t r = 0; r < flow.height(); ++r) {
    for (std::size_t c = 0; c < flow.width(); ++c) {
      binio::put_f32(out, flow.at(0, r, c));
      binio::put_f32(out, flow.at(1, r, c));
    }
  }
  return out;
}

FlowField decode_flo(const std::vector<std::uint8_t>& bytes) {
  binio::Reader rd(bytes, "flo");
  if (rd.f32() != kFloMagic) throw FormatError("flo: bad magic at byte offset 0");
  const std::int32_t w = rd.i32();
  const std::int32_t h = rd.i32();
  if (w <= 0 || h <= 0) rd.fail("non-positive dimensions");
  const std::size_t expect = 8ull * std::size_t(w) * std::size_t(h);
  if (rd.remaining() != expect) {
    rd.fail("payload size " + std::to_string(rd.remaining()) + " does not match header (" + std::to_string(expect) + ")");
  }
  FlowField f(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      f.at(0, r, c) = rd.f32();
      f.at(1, r, c) = rd.f32();
      if (!std::isfinite(f.at(0, r, c)) || !std::isfinite(f.at(1, r, c))) rd.fail("non-finite flow vector");
    }
  }
  return f;
}

FlowField read_flo(const std::string& path) { return decode_flo(binio::read_file(path)); }
void write_flo(const std::string& path, const FlowField& flow) { binio::write_file(path, encode_flo(flow)); }

std::pair<FlowField, FlowField> synth_flow(SynthFlowKind kind, const SynthFlowParams& p, std::size_t height,
                                           std::size_t width) {
  if (kind == SynthFlowKind::Zoom && !(p.scale > 0.0)) {
    throw ParameterError("synth_flow: zoom factor must be positive, got " + std::to_string(p.scale));
  }
  FlowField fwd(height, width), bwd(height, width);
  const double cx = (double(width) - 1.0) / 2.0, cy = (double(height) - 1.0) / 2.0;
  const double ca = std::cos(p.angle), sa = std::sin(p.angle);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      const double x = double(c) - cx, y = double(r) - cy;
      double gx = 0, gy = 0, ix = 0, iy = 0;
      switch (kind) {
        case SynthFlowKind::Translation:
          gx = x + p.tx, gy = y + p.ty, ix = x - p.tx, iy = y - p.ty;
          break;
        case SynthFlowKind::Rotation:
          gx = ca * x - sa * y, gy = sa * x + ca * y;
          ix = ca * x + sa * y, iy = -sa * x + ca * y;
          break;
        case SynthFlowKind::Zoom:
          gx = p.scale * x, gy = p.scale * y, ix = x / p.scale, iy = y / p.scale;
          break;
      }
      fwd.at(0, r, c) = float(gx - x);
      fwd.at(1, r, c) = float(gy - y);
      bwd.at(0, r, c) = float(ix - x);
      bwd.at(1, r, c) = float(iy - y);
    }
  }
  return {std::move(fwd), std::move(bwd)};
}

SynthFlowKind parse_flow_kind(const std::string& name) {
  if (name == "translation") return SynthFlowKind::Translation;
  if (name == "rotation") return SynthFlowKind::Rotation;
  if (name == "zoom") return SynthFlowKind::Zoom;
  throw ParameterError("unknown flow kind '" + name + "' (expected translation, rotation or zoom)");
}

}  // namespace ispw

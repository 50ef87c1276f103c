#include <cmath>
#include <cstring>

#include "ispw/binary_io.hpp"
#include "ispw/flowwarp.hpp"
#include "support.hpp"

using namespace ispw;
using testsupport::random_image;

namespace {

RgbImage ramp(std::size_t h, std::size_t w) {
  RgbImage img(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t x = 0; x < w; ++x) img.at(c, r, x) = float(0.1 * double(x) + 0.01 * double(c));
    }
  }
  return img;
}

FlowField constant_flow(std::size_t h, std::size_t w, float u, float v) {
  FlowField f(h, w);
  for (float& x : f.plane(0)) x = u;
  for (float& x : f.plane(1)) x = v;
  return f;
}

// Direct evaluation of the consistency predicate.
bool consistent(double fu, double fv, double bu, double bv, double a1, double a2) {
  const double su = fu + bu, sv = fv + bv;
  return su * su + sv * sv < a1 * (fu * fu + fv * fv + bu * bu + bv * bv) + a2;
}

RgbImage smooth_image(std::size_t h, std::size_t w) {
  RgbImage img(h, w);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t x = 0; x < w; ++x) {
        img.at(c, r, x) = float(0.5 + 0.25 * std::sin(0.15 * double(x) + double(c)) * std::cos(0.11 * double(r)));
      }
    }
  }
  return img;
}

}  // namespace

TEST_CASE("zero flow warp is the identity") {
  SplitMix64 rng(1);
  const auto img = random_image<RgbImage>(7, 9, rng);
  CHECK(warp(img, FlowField(7, 9)) == img);
}

TEST_CASE("integer flow shifts by whole pixels with replicated border") {
  SplitMix64 rng(2);
  const auto img = random_image<RgbImage>(6, 8, rng);
  for (auto [u, v] : {std::pair{1, 0}, std::pair{-2, 1}, std::pair{0, -3}}) {
    const auto out = warp(img, constant_flow(6, 8, float(u), float(v)));
    for (std::size_t c = 0; c < 3; ++c) {
      for (long r = 0; r < 6; ++r) {
        for (long x = 0; x < 8; ++x) {
          const long sr = std::clamp(r + v, 0L, 5L), sx = std::clamp(x + u, 0L, 7L);
          REQUIRE(out.at(c, std::size_t(r), std::size_t(x)) == img.at(c, std::size_t(sr), std::size_t(sx)));
        }
      }
    }
  }
  const auto shifted = warp(ramp(3, 5), constant_flow(3, 5, 1.0f, 0.0f));
  CHECK(shifted.at(0, 1, 0) == doctest::Approx(0.1));
  CHECK(shifted.at(0, 1, 4) == doctest::Approx(0.4));
}

TEST_CASE("half-pixel flow on a linear ramp gives exact midpoints") {
  const auto img = ramp(4, 6);
  const auto out = warp(img, constant_flow(4, 6, 0.5f, 0.0f));
  for (std::size_t x = 0; x + 1 < 6; ++x) {
    CHECK(out.at(1, 2, x) == doctest::Approx(0.5 * (img.at(1, 2, x) + img.at(1, 2, x + 1))).epsilon(1e-6));
  }
}

TEST_CASE("warp rejects mismatched dimensions") {
  CHECK_THROWS_AS(warp(RgbImage(3, 3), FlowField(3, 4)), DimensionError);
}

TEST_CASE("consistency mask worked examples") {
  CHECK(fb_mask(FlowField(3, 3), FlowField(3, 3)) == full_mask(3, 3));
  CHECK(fb_mask(constant_flow(3, 3, 2.5f, -4.0f), constant_flow(3, 3, -2.5f, 4.0f)) == full_mask(3, 3));
  const auto m = fb_mask(constant_flow(2, 2, 10.0f, 0.0f), FlowField(2, 2));
  for (float v : m.values()) CHECK(v == 0.0f);
}

TEST_CASE("consistency mask matches the direct predicate bitwise on random flows") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto fwd = random_image<FlowField>(2, 3, rng, -3.0, 3.0);
    auto bwd = random_image<FlowField>(2, 3, rng, -3.0, 3.0);
    if (trial % 2 == 0) {
      // Near-consistent pairs exercise both outcomes.
      for (std::size_t i = 0; i < bwd.size(); ++i) bwd.values()[i] = -fwd.values()[i] + float(rng.uniform(-0.8, 0.8));
    }
    const auto m = fb_mask(fwd, bwd);
    for (std::size_t i = 0; i < m.pixels(); ++i) {
      const bool expect = consistent(fwd.plane(0)[i], fwd.plane(1)[i], bwd.plane(0)[i], bwd.plane(1)[i], 0.01, 0.5);
      REQUIRE(m.values()[i] == (expect ? 1.0f : 0.0f));
    }
  }
}

TEST_CASE("consistency mask is symmetric and monotone in its thresholds") {
  SplitMix64 rng(4);
  const auto fwd = random_image<FlowField>(8, 8, rng, -2.0, 2.0);
  const auto bwd = random_image<FlowField>(8, 8, rng, -2.0, 2.0);
  CHECK(fb_mask(fwd, bwd) == fb_mask(bwd, fwd));
  const auto base = fb_mask(fwd, bwd);
  const auto loose2 = fb_mask(fwd, bwd, {0.01, 2.0, false});
  const auto loose1 = fb_mask(fwd, bwd, {0.5, 0.5, false});
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(loose2.values()[i] >= base.values()[i]);
    CHECK(loose1.values()[i] >= base.values()[i]);
  }
  CHECK_THROWS_AS(fb_mask(fwd, FlowField(8, 7)), DimensionError);
}

TEST_CASE("displaced sampling reads the backward flow at the forward target") {
  FlowField fwd = constant_flow(1, 4, 1.0f, 0.0f);
  FlowField bwd(1, 4);
  bwd.at(0, 0, 1) = -1.0f;  // consistent only where p + fwd(p) = column 1
  const auto m = fb_mask(fwd, bwd, {0.0, 0.5, true});
  CHECK(m.at(0, 0, 0) == 1.0f);
  CHECK(m.at(0, 0, 1) == 0.0f);
}

TEST_CASE("flow upsampling doubles size and vectors") {
  FlowField f = constant_flow(2, 3, 1.5f, -0.5f);
  f.at(0, 1, 2) = 4.0f;
  const auto up = upsample_flow_2x(f);
  CHECK(up.height() == 4);
  CHECK(up.width() == 6);
  CHECK(up.at(0, 3, 5) == 8.0f);
  CHECK(up.at(0, 0, 0) == 3.0f);
  CHECK(up.at(1, 2, 1) == -1.0f);
}

TEST_CASE(".flo round trip and layout") {
  SplitMix64 rng(5);
  const auto f = random_image<FlowField>(5, 7, rng, -10.0, 10.0);
  CHECK(decode_flo(encode_flo(f)) == f);
  const auto one = encode_flo(FlowField(1, 1));
  CHECK(one.size() == 20);
  float magic;
  std::memcpy(&magic, one.data(), 4);
  CHECK(magic == 202021.25f);
  auto bad = one;
  const float wrong = 202021.26f;
  std::memcpy(bad.data(), &wrong, 4);
  CHECK_THROWS_AS(decode_flo(bad), FormatError);
  auto truncated = encode_flo(f);
  truncated.pop_back();
  CHECK_THROWS_AS(decode_flo(truncated), FormatError);
  const auto bytes = encode_flo(f);
  // u and v interleaved after the 12-byte header
  float u0, v0;
  std::memcpy(&u0, bytes.data() + 12, 4);
  std::memcpy(&v0, bytes.data() + 16, 4);
  CHECK(u0 == f.at(0, 0, 0));
  CHECK(v0 == f.at(1, 0, 0));
  auto dir = testsupport::scratch_dir("flo");
  write_flo((dir / "a.flo").string(), f);
  CHECK(read_flo((dir / "a.flo").string()) == f);
}

TEST_CASE("synthetic translation has the exact inverse") {
  const auto [fwd, bwd] = synth_flow(SynthFlowKind::Translation, {3.0, -2.0, 0.0, 1.0}, 6, 7);
  CHECK(fwd == constant_flow(6, 7, 3.0f, -2.0f));
  CHECK(bwd == constant_flow(6, 7, -3.0f, 2.0f));
  CHECK(fb_mask(fwd, bwd) == full_mask(6, 7));
}

TEST_CASE("unit zoom is zero flow and zero scale is rejected") {
  const auto [fwd, bwd] = synth_flow(SynthFlowKind::Zoom, {0, 0, 0, 1.0}, 5, 5);
  CHECK(fwd == FlowField(5, 5));
  CHECK(bwd == FlowField(5, 5));
  CHECK_THROWS_AS(synth_flow(SynthFlowKind::Zoom, {0, 0, 0, 0.0}, 5, 5), ParameterError);
  CHECK_THROWS_AS(parse_flow_kind("shear"), ParameterError);
  CHECK(parse_flow_kind("rotation") == SynthFlowKind::Rotation);
}

TEST_CASE("rotation warp composed with its inverse approximates the identity on the interior") {
  const std::size_t n = 64;
  const auto img = smooth_image(n, n);
  const auto [fwd, bwd] = synth_flow(SynthFlowKind::Rotation, {0, 0, 0.1, 1.0}, n, n);
  const auto back = warp(warp(img, fwd), bwd);
  double err = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t r = 12; r < n - 12; ++r) {
      for (std::size_t x = 12; x < n - 12; ++x) err = std::max(err, double(std::abs(back.at(c, r, x) - img.at(c, r, x))));
    }
  }
  CHECK(err < 2e-2);
  // Forward flow is the rotation about the image center.
  const double cx = (n - 1) / 2.0, cy = (n - 1) / 2.0;
  const double px = 40, py = 10;
  const double gx = cx + std::cos(0.1) * (px - cx) - std::sin(0.1) * (py - cy);
  const double gy = cy + std::sin(0.1) * (px - cx) + std::cos(0.1) * (py - cy);
  CHECK(fwd.at(0, 10, 40) == doctest::Approx(gx - px).epsilon(1e-5));
  CHECK(fwd.at(1, 10, 40) == doctest::Approx(gy - py).epsilon(1e-5));
}

TEST_CASE("zoom forward and backward compose to the identity map") {
  const auto [fwd, bwd] = synth_flow(SynthFlowKind::Zoom, {0, 0, 0, 1.25}, 20, 30);
  // g(g^-1(p)) = p at grid points where g^-1(p) lands exactly under bilinear interpolation of an affine field
  const auto composed_u = warp(fwd, bwd);
  for (std::size_t r = 4; r < 16; ++r) {
    for (std::size_t x = 6; x < 24; ++x) {
      CHECK(bwd.at(0, r, x) + composed_u.at(0, r, x) == doctest::Approx(0.0).epsilon(1e-4).scale(1.0));
      CHECK(bwd.at(1, r, x) + composed_u.at(1, r, x) == doctest::Approx(0.0).epsilon(1e-4).scale(1.0));
    }
  }
}

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "ispw/train.hpp"

namespace ispw::train {

namespace {

const Eigen::Matrix3d& yiq() {
  static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.299, 0.587, 0.114,  //
                                    0.596, -0.274, -0.322,                      //
                                    0.211, -0.523, 0.312)
                                       .finished();
  return m;
}

const Eigen::Matrix3d& yiq_inverse() {
  static const Eigen::Matrix3d m = yiq().inverse();
  return m;
}

}  // namespace

ColorJitter random_jitter(SplitMix64& rng, double range) {
  ColorJitter j;
  j.brightness = rng.uniform(-range, range);
  j.contrast = rng.uniform(-range, range);
  j.saturation = rng.uniform(-range, range);
  j.hue = rng.uniform(-range, range);
  return j;
}

RgbImage color_jitter(const RgbImage& y, const ColorJitter& j) {
  const std::size_t n = y.pixels();
  std::vector<double> v(y.values().begin(), y.values().end());
  for (double& x : v) x += j.brightness;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  for (double& x : v) x = (x - mean) * (1.0 + j.contrast) + mean;
  const double* r = v.data();
  const double* g = v.data() + n;
  const double* b = v.data() + 2 * n;
  const double co = std::cos(j.hue * std::numbers::pi), si = std::sin(j.hue * std::numbers::pi);
  const auto& fwd = yiq();
  const auto& inv = yiq_inverse();
  RgbImage out(y.height(), y.width());
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d p(r[i], g[i], b[i]);
    const double luma = fwd.row(0).dot(p);
    p += j.saturation * (Eigen::Vector3d::Constant(luma) - p);
    Eigen::Vector3d q = fwd * p;
    const double ci = co * q(1) - si * q(2), cq = si * q(1) + co * q(2);
    q(1) = ci;
    q(2) = cq;
    const Eigen::Vector3d o = inv * q;
    for (std::size_t c = 0; c < 3; ++c) out.plane(c)[i] = float(std::clamp(o(Eigen::Index(c)), 0.0, 1.0));
  }
  return out;
}

RgbImage color_jitter(const RgbImage& y, std::uint64_t seed, double range) {
  SplitMix64 rng(seed);
  return color_jitter(y, random_jitter(rng, range));
}

}  // namespace ispw::train

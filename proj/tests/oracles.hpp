#pragma once

// Independent reference computations used by unit and acceptance tests.
// These deliberately avoid the library's own helpers.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ispw/image.hpp"

namespace oracle {

using Real = long double;

/// Solves a dense n x n system by Gaussian elimination with partial pivoting.
inline std::vector<Real> solve(std::vector<Real> a, std::vector<Real> r, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::fabs(a[row * n + col]) > std::fabs(a[piv * n + col])) piv = row;
    }
    for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[piv * n + k]);
    std::swap(r[col], r[piv]);
    for (std::size_t row = col + 1; row < n; ++row) {
      const Real f = a[row * n + col] / a[col * n + col];
      for (std::size_t k = col; k < n; ++k) a[row * n + k] -= f * a[col * n + k];
      r[row] -= f * r[col];
    }
  }
  std::vector<Real> x(n);
  for (std::size_t i = n; i-- > 0;) {
    Real s = r[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
    x[i] = s / a[i * n + i];
  }
  return x;
}

/// Per-pixel softmax weights of pixel intensities against centroid k,
/// normalized over pixels.
inline std::vector<Real> pixel_weights(std::span<const float> plane, Real k, Real temperature) {
  std::vector<Real> w(plane.size());
  Real mx = -INFINITY;
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const Real d = Real(plane[i]) - k;
    w[i] = -d * d / temperature;
    mx = std::max(mx, w[i]);
  }
  Real z = 0;
  for (Real& v : w) {
    v = std::exp(v - mx);
    z += v;
  }
  for (Real& v : w) v /= z;
  return w;
}

inline std::vector<Real> centers(std::span<const float> plane, int bins) {
  const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
  std::vector<Real> k(static_cast<std::size_t>(bins));
  for (int b = 1; b <= bins; ++b) k[std::size_t(b - 1)] = Real(*lo) + (Real(b) - 0.5L) * (Real(*hi) - Real(*lo)) / bins;
  return k;
}

/// Ridge-stabilized weighted normal equations for the cross-channel affine
/// map of output channel j, bin b. Returns (A1, A2, A3, B).
inline std::array<Real, 4> affine_dep_bin(const ispw::RgbImage& xt, const ispw::RgbImage& c, std::size_t j,
                                          std::size_t b, int bins) {
  const Real temperature = 1.0L / (Real(bins) * bins);
  const auto k = centers(xt.plane(j), bins);
  const auto w = pixel_weights(xt.plane(j), k[b], temperature);
  std::vector<Real> a(16, 0), r(4, 0);
  Real wsum = 0;
  for (std::size_t i = 0; i < xt.pixels(); ++i) {
    const Real row[4] = {xt.plane(0)[i], xt.plane(1)[i], xt.plane(2)[i], 1};
    for (int p = 0; p < 4; ++p) {
      for (int q = 0; q < 4; ++q) a[std::size_t(p * 4 + q)] += w[i] * row[p] * row[q];
      r[std::size_t(p)] += w[i] * row[p] * Real(c.plane(j)[i]);
    }
    wsum += w[i];
  }
  for (int p = 0; p < 4; ++p) a[std::size_t(p * 5)] += 1e-6L * (wsum + 1);
  const auto v = solve(a, r, 4);
  return {v[0], v[1], v[2], v[3]};
}

/// gamma correction of one value with the given plane max and floor.
inline double gamma_value(double v, double plane_max, double floor, double gamma = 2.2) {
  return std::clamp(std::pow(v / std::max(plane_max, floor), 1.0 / gamma), 0.0, 1.0);
}

/// 10 log10(1 / mse) over all samples.
inline double psnr(std::span<const float> a, std::span<const float> b) {
  long double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += ((long double)a[i] - b[i]) * ((long double)a[i] - b[i]);
  mse /= a.size();
  return double(10.0L * std::log10(1.0L / mse));
}

}  // namespace oracle

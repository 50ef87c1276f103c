#pragma once

#include <doctest.h>

#include <filesystem>
#include <string>

#include "ispw/grad/fdcheck.hpp"
#include "ispw/grad/ops.hpp"
#include "ispw/image.hpp"
#include "ispw/rng.hpp"

namespace testsupport {

using ispw::grad::ParamSet;
using ispw::grad::Shape;
using ispw::grad::Tape;
using ispw::grad::Tensor;
using ispw::grad::Var;

inline Tensor<double> random_tensor(Shape shape, ispw::SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// sum(v * R) for a fixed random R, so every output element carries gradient.
template <class T>
Var<T> probe(Var<T> v, std::uint64_t seed) {
  ispw::SplitMix64 rng(seed);
  Tensor<T> r(v.shape());
  for (T& x : r.values()) x = T(rng.uniform(-1.0, 1.0));
  return ispw::grad::sum(ispw::grad::mul(v, v.tape->constant(std::move(r))));
}

template <class Img>
Img random_image(std::size_t h, std::size_t w, ispw::SplitMix64& rng, double lo = 0.0, double hi = 1.0) {
  Img img(h, w);
  for (float& v : img.values()) v = float(rng.uniform(lo, hi));
  return img;
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ispw_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport

#pragma once

// Shared building blocks: parameter scopes, conv layers and the RRDB unit.

#include <string>

#include "ispw/grad/ops.hpp"
#include "ispw/rng.hpp"

namespace ispw::models {

using grad::ParamSet;
using grad::Tape;
using grad::Tensor;
using grad::Var;

/// Resolves parameter names under a dotted prefix on one tape.
template <class T>
struct Scope {
  Tape<T>& tape;
  const ParamSet<T>& params;
  std::string prefix;

  Var<T> p(const std::string& name) const { return tape.param(params, prefix + name); }
  Scope sub(const std::string& name) const { return {tape, params, prefix + name + "."}; }
};

template <class T>
Var<T> conv(const Scope<T>& s, const std::string& name, Var<T> x) {
  return grad::conv2d(x, s.p(name + ".w"), s.p(name + ".b"));
}

template <class T>
Var<T> conv_lrelu(const Scope<T>& s, const std::string& name, Var<T> x) {
  return grad::leaky_relu(conv(s, name, x), T(0.2));
}

/// Residual-in-residual dense block: three dense blocks of five convolutions,
/// residual scaling 0.2 inside each dense block and around the whole unit.
template <class T>
Var<T> rrdb(const Scope<T>& s, Var<T> x);

/// Adds `name.w` [out,in,k,k] (Kaiming-uniform) and `name.b` [out] (zeros).
void add_conv(ParamSet<float>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
              SplitMix64& rng, double scale = 1.0);
/// Adds `name.w` [in,out] and, if `bias`, `name.b` [out].
void add_linear(ParamSet<float>& ps, const std::string& name, std::size_t in, std::size_t out, SplitMix64& rng,
                bool bias = true, double scale = 1.0);
/// Adds `name.g` (ones) and `name.b` (zeros) of length `dim`.
void add_layer_norm(ParamSet<float>& ps, const std::string& name, std::size_t dim);
void add_rrdb(ParamSet<float>& ps, const std::string& name, std::size_t channels, std::size_t growth,
              SplitMix64& rng);

}  // namespace ispw::models

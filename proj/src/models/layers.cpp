#include "ispw/models/layers.hpp"

namespace ispw::models {

namespace {

template <class T>
Var<T> dense_block(const Scope<T>& s, Var<T> x) {
  std::vector<Var<T>> feats{x};
  for (int i = 0; i < 4; ++i) {
    feats.push_back(conv_lrelu(s, "conv" + std::to_string(i), grad::concat_channels(feats)));
  }
  Var<T> out = conv(s, "conv4", grad::concat_channels(feats));
  return grad::add(x, grad::scalar_mul(out, T(0.2)));
}

}  // namespace

template <class T>
Var<T> rrdb(const Scope<T>& s, Var<T> x) {
  Var<T> h = x;
  for (int i = 0; i < 3; ++i) h = dense_block(s.sub("db" + std::to_string(i)), h);
  return grad::add(x, grad::scalar_mul(h, T(0.2)));
}

template Var<float> rrdb(const Scope<float>&, Var<float>);
template Var<double> rrdb(const Scope<double>&, Var<double>);

void add_conv(ParamSet<float>& ps, const std::string& name, std::size_t in, std::size_t out, std::size_t k,
              SplitMix64& rng, double scale) {
  ps.add(name + ".w", grad::init::kaiming_uniform<float>({out, in, k, k}, in * k * k, rng, scale));
  ps.add(name + ".b", Tensor<float>({out}));
}

void add_linear(ParamSet<float>& ps, const std::string& name, std::size_t in, std::size_t out, SplitMix64& rng,
                bool bias, double scale) {
  ps.add(name + ".w", grad::init::kaiming_uniform<float>({in, out}, in, rng, scale));
  if (bias) ps.add(name + ".b", Tensor<float>({out}));
}

void add_layer_norm(ParamSet<float>& ps, const std::string& name, std::size_t dim) {
  ps.add(name + ".g", Tensor<float>({dim}, 1.0f));
  ps.add(name + ".b", Tensor<float>({dim}));
}

void add_rrdb(ParamSet<float>& ps, const std::string& name, std::size_t channels, std::size_t growth,
              SplitMix64& rng) {
  for (int d = 0; d < 3; ++d) {
    const std::string db = name + ".db" + std::to_string(d);
    for (std::size_t i = 0; i < 4; ++i) {
      add_conv(ps, db + ".conv" + std::to_string(i), channels + i * growth, growth, 3, rng, 0.1);
    }
    add_conv(ps, db + ".conv4", channels + 4 * growth, channels, 3, rng, 0.1);
  }
}

}  // namespace ispw::models

#include <cmath>

#include "ispw/models/networks.hpp"

namespace ispw::models {

void GctConfig::validate() const {
  if (latent_count < 1 || latent_dim < 1 || heads < 1 || input_dim < 1 || ff_expansion < 1) {
    throw ParameterError("gct: latent_count, latent_dim, heads, input_dim and ff_expansion must be >= 1");
  }
  if (latent_dim % heads != 0) {
    throw ParameterError("gct: latent_dim " + std::to_string(latent_dim) + " is not divisible by heads " +
                         std::to_string(heads));
  }
}

void add_gct(ParamSet<float>& ps, const std::string& name, const GctConfig& cfg, SplitMix64& rng,
             bool zero_output) {
  cfg.validate();
  const std::size_t D = cfg.input_dim, C = cfg.latent_dim, K = cfg.latent_count, F = cfg.ff_expansion * C;
  const std::string p = name + ".";
  ps.add(p + "z", grad::init::kaiming_uniform<float>({K, C}, C, rng));
  add_layer_norm(ps, p + "ca.ln_x", D);
  add_layer_norm(ps, p + "ca.ln_z", C);
  add_linear(ps, p + "ca.q", C, C, rng, false);
  add_linear(ps, p + "ca.k", D, C, rng, false);
  add_linear(ps, p + "ca.v", D, C, rng, false);
  add_linear(ps, p + "ca.o", C, C, rng, true, 0.5);
  for (std::size_t l = 0; l < cfg.self_attn_layers; ++l) {
    const std::string sa = p + "sa" + std::to_string(l) + ".";
    add_layer_norm(ps, sa + "ln1", C);
    add_linear(ps, sa + "q", C, C, rng, false);
    add_linear(ps, sa + "k", C, C, rng, false);
    add_linear(ps, sa + "v", C, C, rng, false);
    add_linear(ps, sa + "o", C, C, rng, true, 0.5);
    add_layer_norm(ps, sa + "ln2", C);
    add_linear(ps, sa + "ff1", C, F, rng);
    add_linear(ps, sa + "ff2", F, C, rng, true, 0.5);
  }
  add_layer_norm(ps, p + "dec.ln_x", D);
  add_layer_norm(ps, p + "dec.ln_z", C);
  add_linear(ps, p + "dec.q", D, C, rng, false);
  add_linear(ps, p + "dec.k", C, C, rng, false);
  add_linear(ps, p + "dec.v", C, C, rng, false);
  add_linear(ps, p + "dec.o", C, D, rng, true, 0.1);
  if (zero_output) ps.at(p + "dec.o.w").fill(0.0f);
}

template <class T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads) {
  const std::size_t C = q.shape().at(1);
  if (k.shape().at(1) != C || v.shape().at(1) != C || k.shape()[0] != v.shape()[0]) {
    throw DimensionError("attention: incompatible shapes " + grad::shape_str(q.shape()) + ", " +
                         grad::shape_str(k.shape()) + ", " + grad::shape_str(v.shape()));
  }
  const std::size_t dh = C / heads;
  const T scale = T(1) / std::sqrt(T(dh));
  std::vector<Var<T>> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var<T> qh = heads == 1 ? q : grad::slice_cols(q, h * dh, dh);
    Var<T> kh = heads == 1 ? k : grad::slice_cols(k, h * dh, dh);
    Var<T> vh = heads == 1 ? v : grad::slice_cols(v, h * dh, dh);
    Var<T> scores = grad::scalar_mul(grad::matmul(qh, grad::transpose(kh)), scale);
    outs.push_back(grad::matmul(grad::softmax(scores, 1), vh));
  }
  return heads == 1 ? outs[0] : grad::concat_cols(outs);
}

namespace {

template <class T>
Var<T> ln(const Scope<T>& s, const std::string& name, Var<T> x) {
  return grad::layer_norm(x, s.p(name + ".g"), s.p(name + ".b"));
}

template <class T>
Var<T> lin(const Scope<T>& s, const std::string& name, Var<T> x, bool bias) {
  return grad::linear(x, s.p(name + ".w"), bias ? s.p(name + ".b") : Var<T>{});
}

}  // namespace

template <class T>
Var<T> gct_forward(const Scope<T>& s, Var<T> input, const GctConfig& cfg) {
  cfg.validate();
  const grad::Shape shape = input.shape();
  if (shape.size() != 3 || shape[0] != cfg.input_dim) {
    throw DimensionError("gct_forward: expected [" + std::to_string(cfg.input_dim) + ",H,W], got " +
                         grad::shape_str(shape));
  }
  const std::size_t D = shape[0], N = shape[1] * shape[2];
  Var<T> tokens = grad::transpose(grad::reshape(input, {D, N}));

  // Encoder cross-attention: latent queries over image tokens.
  Var<T> z = s.p("z");
  Var<T> tx = ln(s, "ca.ln_x", tokens);
  Var<T> zn = ln(s, "ca.ln_z", z);
  Var<T> att = attention(lin(s, "ca.q", zn, false), lin(s, "ca.k", tx, false), lin(s, "ca.v", tx, false), cfg.heads);
  z = grad::add(z, lin(s, "ca.o", att, true));

  for (std::size_t l = 0; l < cfg.self_attn_layers; ++l) {
    const std::string sa = "sa" + std::to_string(l) + ".";
    Var<T> h = ln(s, sa + "ln1", z);
    h = attention(lin(s, sa + "q", h, false), lin(s, sa + "k", h, false), lin(s, sa + "v", h, false), cfg.heads);
    z = grad::add(z, lin(s, sa + "o", h, true));
    Var<T> f = grad::leaky_relu(lin(s, sa + "ff1", ln(s, sa + "ln2", z), true), T(0.2));
    z = grad::add(z, lin(s, sa + "ff2", f, true));
  }

  // Decoder cross-attention: token queries over the latent array.
  Var<T> qx = ln(s, "dec.ln_x", tokens);
  Var<T> zd = ln(s, "dec.ln_z", z);
  Var<T> o = attention(lin(s, "dec.q", qx, false), lin(s, "dec.k", zd, false), lin(s, "dec.v", zd, false), cfg.heads);
  o = lin(s, "dec.o", o, true);
  Var<T> out = grad::reshape(grad::transpose(o), shape);
  return grad::add(input, out);
}

GctFlops gct_flops(const GctConfig& cfg, std::size_t tokens) {
  const double N = double(tokens), D = double(cfg.input_dim), C = double(cfg.latent_dim);
  const double K = double(cfg.latent_count), F = double(cfg.ff_expansion) * C;
  GctFlops f;
  // Matrix products count 2 flops per multiply-add; layer norm ~8 and softmax ~5 per element.
  f.token_terms += 8 * N * D;              // ca.ln_x
  f.token_terms += 2 * (2 * N * D * C);    // ca.k, ca.v
  f.token_terms += 2 * (2 * K * N * C);    // scores + weighted sum
  f.token_terms += 5 * K * N;              // softmax over tokens
  f.latent_terms += 8 * K * C + 2 * (2 * K * C * C) + 2 * K * C;  // ln_z, ca.q, ca.o, residual
  const double layers = double(cfg.self_attn_layers);
  f.latent_terms += layers * (2 * 8 * K * C + 2 * (4 * K * C * C) + 2 * (2 * K * K * C) + 5 * K * K +
                              2 * (2 * K * C * F) + K * F + 2 * K * C);
  f.token_terms += 8 * N * D + 2 * N * D * C;   // dec.ln_x, dec.q
  f.latent_terms += 8 * K * C + 2 * (2 * K * C * C);  // dec.ln_z, dec.k, dec.v
  f.token_terms += 2 * (2 * N * K * C) + 5 * N * K;  // scores, weighted sum, softmax
  f.token_terms += 2 * N * C * D + 2 * N * D;        // dec.o and residual
  return f;
}

template Var<float> gct_forward(const Scope<float>&, Var<float>, const GctConfig&);
template Var<double> gct_forward(const Scope<double>&, Var<double>, const GctConfig&);
template Var<float> attention(Var<float>, Var<float>, Var<float>, std::size_t);
template Var<double> attention(Var<double>, Var<double>, Var<double>, std::size_t);

}  // namespace ispw::models

#pragma once

// Global Context Transformer, U-Net color predictor G and the
// color-conditional ISP network F. Image tensors are [C,H,W].

#include <cstdint>
#include <vector>

#include "ispw/image.hpp"
#include "ispw/models/layers.hpp"

namespace ispw::models {

struct GctConfig {
  std::size_t latent_count = 8;   // K
  std::size_t latent_dim = 16;    // C
  std::size_t heads = 4;
  std::size_t self_attn_layers = 2;
  std::size_t input_dim = 8;      // D_l
  std::size_t ff_expansion = 2;

  void validate() const;
};

struct UNetConfig {
  /// Feature width per level; the level count is channels.size().
  std::vector<std::size_t> channels{8, 16};
  std::vector<std::size_t> latent_count{8, 8};
  std::vector<std::size_t> latent_dim{16, 16};
  std::size_t heads = 4;
  std::size_t self_attn_layers = 2;
  bool global_context = true;
  bool reconstruct = true;
  std::size_t rrdb_growth = 8;

  std::size_t levels() const { return channels.size(); }
  GctConfig gct(std::size_t level) const;
  void validate() const;
  /// D_l = 64 * 2^l, K_l = 1024 / 2^l, C_l = 2^(l+7), four levels.
  static UNetConfig full_scale();
};

struct IspNetConfig {
  std::size_t rrdb_blocks = 2;
  std::size_t channels = 16;
  std::size_t growth = 8;

  void validate() const;
  static IspNetConfig full_scale();
};

// ---- Global Context Transformer ----

/// Adds the block's parameters under `name.`; `zero_output` zeroes the final
/// decoder projection so the block starts as the identity.
void add_gct(ParamSet<float>& ps, const std::string& name, const GctConfig& cfg, SplitMix64& rng,
             bool zero_output = false);

/// I [D,H,W] -> I + O, O routed through the K x C latent array.
template <class T>
Var<T> gct_forward(const Scope<T>& s, Var<T> input, const GctConfig& cfg);

/// Multi-head scaled dot-product attention on [n,C] queries and [m,C] keys/values.
template <class T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, std::size_t heads);

struct GctFlops {
  double token_terms = 0.0;   // proportional to N
  double latent_terms = 0.0;  // independent of N
  double total() const { return token_terms + latent_terms; }
};

/// Analytic floating-point operation count of one gct_forward on `tokens` tokens.
GctFlops gct_flops(const GctConfig& cfg, std::size_t tokens);

// ---- Color predictor G ----

grad::ParamSet<float> init_color_predictor(const UNetConfig& cfg, std::uint64_t seed);

template <class T>
struct ColorPrediction {
  Var<T> color;  // [3,H,W]
  Var<T> recon;  // [4,H,W]; invalid when cfg.reconstruct is false
};

template <class T>
ColorPrediction<T> color_predictor(const Scope<T>& s, Var<T> raw, Var<T> coords, const UNetConfig& cfg);

struct ColorPredictionImages {
  RgbImage color;
  RawImage recon;
};
ColorPredictionImages color_predictor_forward(const RawImage& raw, const CoordMap& coords,
                                              const grad::ParamSet<float>& params, const UNetConfig& cfg,
                                              const std::string& prefix = "");

// ---- ISP network F ----

grad::ParamSet<float> init_ispnet(const IspNetConfig& cfg, std::uint64_t seed);

/// concat(x, c^) -> conv -> RRDBs -> 2x nearest -> conv + lrelu -> 3-channel conv.
template <class T>
Var<T> ispnet(const Scope<T>& s, Var<T> raw, Var<T> chat, const IspNetConfig& cfg);

RgbImage ispnet_forward(const RawImage& raw, const RgbImage& chat, const grad::ParamSet<float>& params,
                        const IspNetConfig& cfg, const std::string& prefix = "");

}  // namespace ispw::models

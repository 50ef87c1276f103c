#pragma once

// Differentiable primitives. Image-like tensors are [C, H, W]; token
// matrices are [N, D]. Shape errors name both offending shapes.

#include <vector>

#include "ispw/grad/tape.hpp"

namespace ispw::grad {

enum class Reduction { Mean, Sum };

template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);
template <class T> Var<T> scalar_mul(Var<T> a, T s);
template <class T> Var<T> sum(Var<T> a);
template <class T> Var<T> reshape(Var<T> a, Shape shape);

/// 2-D matrix product [M,K] x [K,N].
template <class T> Var<T> matmul(Var<T> a, Var<T> b);
template <class T> Var<T> transpose(Var<T> a);
/// x[N,D] + b[D] broadcast over rows.
template <class T> Var<T> add_row_bias(Var<T> x, Var<T> b);
/// x[N,Din] w[Din,Dout] (+ b[Dout]).
template <class T> Var<T> linear(Var<T> x, Var<T> w, Var<T> b);

/// x[C,H,W] * w[O,C,k,k] + b[O], k in {1, 3}, stride 1, replicate padding.
template <class T> Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b);
/// Transposed convolution, kernel 2, stride 2: x[C,H,W], w[C,O,2,2], b[O] -> [O,2H,2W].
template <class T> Var<T> conv_transpose2x2(Var<T> x, Var<T> w, Var<T> b);

template <class T> Var<T> leaky_relu(Var<T> x, T slope = T(0.2));
/// 2x2 average pooling on [C,H,W] with even H, W.
template <class T> Var<T> avg_pool_2x2(Var<T> x);
template <class T> Var<T> upsample_nearest_2x(Var<T> x);
/// Concatenate along axis 0 (channels of [C,H,W]).
template <class T> Var<T> concat_channels(const std::vector<Var<T>>& xs);
/// Concatenate [N,D_i] along axis 1.
template <class T> Var<T> concat_cols(const std::vector<Var<T>>& xs);
template <class T> Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t len);

/// Softmax along `axis` of a tensor of any rank.
template <class T> Var<T> softmax(Var<T> x, std::size_t axis);
/// Layer norm over the last axis with learned gain and bias.
template <class T> Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5));

/// Depthwise separable blur with fixed taps and replicate padding on [C,H,W].
template <class T> Var<T> fixed_blur(Var<T> x, const std::vector<double>& taps);

/// L1 between pred and target [C,H,W] over pixels where mask[H,W] (or [1,H,W]) is nonzero.
/// Mean reduction divides by (sum(mask) * C); an all-zero mask yields 0.
template <class T>
Var<T> masked_l1(Var<T> pred, Var<T> target, const Tensor<T>& mask, Reduction red = Reduction::Mean);
/// Unmasked mean absolute difference.
template <class T> Var<T> l1(Var<T> pred, Var<T> target);

}  // namespace ispw::grad

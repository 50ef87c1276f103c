#include "ispw/grad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "ispw/simd/kernels.hpp"

namespace ispw::grad {

namespace {

template <class T>
Tape<T>& tape_of(Var<T> a, Var<T> b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError(std::string(op) + ": operands on different tapes");
  return *a.tape;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

void require_rank(const char* op, const Shape& s, std::size_t rank) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " + shape_str(s));
  }
}

template <class T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src, T scale = T(1)) {
  simd::axpy(scale, std::span<const T>(src.values()), dst.values());
}

template <class T>
std::vector<T> transposed(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
  }
  return out;
}

inline std::size_t clampi(std::ptrdiff_t v, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

// Replicate-padded 3x3 patches: row (c*9 + ky*3 + kx), column (y*W + x).
template <class T>
void im2col3(const T* x, std::size_t C, std::size_t H, std::size_t W, T* col) {
  const std::size_t hw = H * W;
  for (std::size_t c = 0; c < C; ++c) {
    const T* plane = x + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* dst = col + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < H; ++y) {
          const T* src = plane + clampi(std::ptrdiff_t(y + ky) - 1, H) * W;
          T* d = dst + y * W;
          if (kx == 1) {
            std::memcpy(d, src, W * sizeof(T));
          } else if (kx == 0) {
            d[0] = src[0];
            if (W > 1) std::memcpy(d + 1, src, (W - 1) * sizeof(T));
          } else {
            if (W > 1) std::memcpy(d, src + 1, (W - 1) * sizeof(T));
            d[W - 1] = src[W - 1];
          }
        }
      }
    }
  }
}

template <class T>
void col2im3(const T* col, std::size_t C, std::size_t H, std::size_t W, T* gx) {
  const std::size_t hw = H * W;
  for (std::size_t c = 0; c < C; ++c) {
    T* plane = gx + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* src = col + (c * 9 + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < H; ++y) {
          T* d = plane + clampi(std::ptrdiff_t(y + ky) - 1, H) * W;
          const T* s = src + y * W;
          if (kx == 1) {
            for (std::size_t x = 0; x < W; ++x) d[x] += s[x];
          } else if (kx == 0) {
            d[0] += s[0];
            for (std::size_t x = 1; x < W; ++x) d[x - 1] += s[x];
          } else {
            for (std::size_t x = 0; x + 1 < W; ++x) d[x + 1] += s[x];
            d[W - 1] += s[W - 1];
          }
        }
      }
    }
  }
}

// One separable pass along rows (axis 2) or columns (axis 1) of [C,H,W].
template <class T>
void blur_pass(const T* in, T* out, std::size_t C, std::size_t H, std::size_t W, const std::vector<double>& taps,
               bool along_width, bool adjoint) {
  const auto rad = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const std::size_t n_line = along_width ? W : H;
  const std::size_t stride = along_width ? 1 : W;
  const std::size_t lines = along_width ? H : W;
  std::fill(out, out + C * H * W, T(0));
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t base = c * H * W + (along_width ? l * W : l);
      for (std::size_t i = 0; i < n_line; ++i) {
        for (std::size_t t = 0; t < taps.size(); ++t) {
          const std::size_t j = clampi(std::ptrdiff_t(i) + std::ptrdiff_t(t) - rad, n_line);
          if (adjoint) {
            out[base + j * stride] += T(taps[t]) * in[base + i * stride];
          } else {
            out[base + i * stride] += T(taps[t]) * in[base + j * stride];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& tp = tape_of(a, b, "add");
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor<T> out = a.value();
  accumulate(out, b.value());
  const int ia = a.id, ib = b.id;
  return tp.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    if (t.requires_grad(ia)) accumulate(t.grad_ref(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad_ref(ib), g);
  }, "add");
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  auto& tp = tape_of(a, b, "sub");
  if (a.shape() != b.shape()) shape_mismatch("sub", a.shape(), b.shape());
  Tensor<T> out = a.value();
  accumulate(out, b.value(), T(-1));
  const int ia = a.id, ib = b.id;
  return tp.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    if (t.requires_grad(ia)) accumulate(t.grad_ref(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad_ref(ib), g, T(-1));
  }, "sub");
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  auto& tp = tape_of(a, b, "mul");
  if (a.shape() != b.shape()) shape_mismatch("mul", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  const int ia = a.id, ib = b.id;
  return tp.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    const auto& va = t.value(ia);
    const auto& vb = t.value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_ref(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_ref(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
    }
  }, "mul");
}

template <class T>
Var<T> scalar_mul(Var<T> a, T s) {
  Tensor<T> out = a.value();
  for (T& v : out.values()) v *= s;
  const int ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, s](Tape<T>& t, int self) {
    accumulate(t.grad_ref(ia), t.grad_ref(self), s);
  }, "scalar_mul");
}

template <class T>
Var<T> sum(Var<T> a) {
  T s = T(0);
  for (T v : a.value().values()) s += v;
  const int ia = a.id;
  return a.tape->record(Tensor<T>({1}, s), {ia}, [ia](Tape<T>& t, int self) {
    const T g = t.grad_ref(self)[0];
    for (T& v : t.grad_ref(ia).values()) v += g;
  }, "sum");
}

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  const int ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia](Tape<T>& t, int self) {
    accumulate(t.grad_ref(ia), t.grad_ref(self));
  }, "reshape");
}

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& tp = tape_of(a, b, "matmul");
  require_rank("matmul", a.shape(), 2);
  require_rank("matmul", b.shape(), 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_mismatch("matmul", a.shape(), b.shape());
  Tensor<T> out({m, n});
  simd::gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data(), false);
  const int ia = a.id, ib = b.id;
  return tp.record(std::move(out), {ia, ib}, [ia, ib, m, n, k](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    if (t.requires_grad(ia)) {
      simd::gemm_nt(m, k, n, g.data(), t.value(ib).data(), t.grad_ref(ia).data(), true);
    }
    if (t.requires_grad(ib)) {
      const auto at = transposed(t.value(ia).data(), m, k);
      simd::gemm_nn(k, n, m, at.data(), g.data(), t.grad_ref(ib).data(), true);
    }
  }, "matmul");
}

template <class T>
Var<T> transpose(Var<T> a) {
  require_rank("transpose", a.shape(), 2);
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor<T> out({c, r}, transposed(a.value().data(), r, c));
  const int ia = a.id;
  return a.tape->record(std::move(out), {ia}, [ia, r, c](Tape<T>& t, int self) {
    const auto gt = transposed(t.grad_ref(self).data(), c, r);
    auto& ga = t.grad_ref(ia);
    for (std::size_t i = 0; i < gt.size(); ++i) ga[i] += gt[i];
  }, "transpose");
}

template <class T>
Var<T> add_row_bias(Var<T> x, Var<T> b) {
  auto& tp = tape_of(x, b, "add_row_bias");
  require_rank("add_row_bias", x.shape(), 2);
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  if (b.value().numel() != d) shape_mismatch("add_row_bias", x.shape(), b.shape());
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] += b.value()[j];
  }
  const int ix = x.id, ib = b.id;
  return tp.record(std::move(out), {ix, ib}, [ix, ib, n, d](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    if (t.requires_grad(ix)) accumulate(t.grad_ref(ix), g);
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_ref(ib);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
      }
    }
  }, "add_row_bias");
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  Var<T> y = matmul(x, w);
  return b.valid() ? add_row_bias(y, b) : y;
}

template <class T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b) {
  auto& tp = tape_of(x, w, "conv2d");
  require_rank("conv2d", x.shape(), 3);
  require_rank("conv2d", w.shape(), 4);
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const std::size_t O = w.shape()[0], k = w.shape()[2];
  if (w.shape()[1] != C || w.shape()[3] != k || (k != 1 && k != 3)) shape_mismatch("conv2d", x.shape(), w.shape());
  if (b.valid() && b.value().numel() != O) shape_mismatch("conv2d(bias)", w.shape(), b.shape());
  const std::size_t hw = H * W;
  const std::size_t ck = C * k * k;
  std::shared_ptr<std::vector<T>> col;
  const T* colp = x.value().data();
  if (k == 3) {
    col = std::make_shared<std::vector<T>>(ck * hw);
    im2col3(x.value().data(), C, H, W, col->data());
    colp = col->data();
  }
  Tensor<T> out({O, H, W});
  simd::gemm_nn(O, hw, ck, w.value().data(), colp, out.data(), false);
  if (b.valid()) {
    for (std::size_t o = 0; o < O; ++o) {
      const T bv = b.value()[o];
      T* row = out.data() + o * hw;
      for (std::size_t i = 0; i < hw; ++i) row[i] += bv;
    }
  }
  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  std::vector<int> inputs{ix, iw};
  if (ib >= 0) inputs.push_back(ib);
  return tp.record(std::move(out), std::move(inputs), [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    const T* cp = k == 3 ? col->data() : t.value(ix).data();
    if (t.requires_grad(iw)) simd::gemm_nt(O, ck, hw, g.data(), cp, t.grad_ref(iw).data(), true);
    if (ib >= 0 && t.requires_grad(ib)) {
      auto& gb = t.grad_ref(ib);
      for (std::size_t o = 0; o < O; ++o) {
        T s = T(0);
        for (std::size_t i = 0; i < hw; ++i) s += g[o * hw + i];
        gb[o] += s;
      }
    }
    if (t.requires_grad(ix)) {
      const auto wt = transposed(t.value(iw).data(), O, ck);
      if (k == 3) {
        std::vector<T> dcol(ck * hw);
        simd::gemm_nn(ck, hw, O, wt.data(), g.data(), dcol.data(), false);
        col2im3(dcol.data(), C, H, W, t.grad_ref(ix).data());
      } else {
        simd::gemm_nn(ck, hw, O, wt.data(), g.data(), t.grad_ref(ix).data(), true);
      }
    }
  }, "conv2d");
}

template <class T>
Var<T> conv_transpose2x2(Var<T> x, Var<T> w, Var<T> b) {
  auto& tp = tape_of(x, w, "conv_transpose2x2");
  require_rank("conv_transpose2x2", x.shape(), 3);
  require_rank("conv_transpose2x2", w.shape(), 4);
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const std::size_t O = w.shape()[1];
  if (w.shape()[0] != C || w.shape()[2] != 2 || w.shape()[3] != 2) {
    shape_mismatch("conv_transpose2x2", x.shape(), w.shape());
  }
  if (b.valid() && b.value().numel() != O) shape_mismatch("conv_transpose2x2(bias)", w.shape(), b.shape());
  const std::size_t hw = H * W;
  // Weight as a [4*O, C] matrix: row (o*4 + a*2 + bb).
  auto wmat = [C, O](const Tensor<T>& wt) {
    std::vector<T> m(4 * O * C);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t r = 0; r < 4 * O; ++r) m[r * C + c] = wt[c * 4 * O + r];
    }
    return m;
  };
  const auto wm = wmat(w.value());
  std::vector<T> tmp(4 * O * hw);
  simd::gemm_nn(4 * O, hw, C, wm.data(), x.value().data(), tmp.data(), false);
  Tensor<T> out({O, 2 * H, 2 * W});
  for (std::size_t o = 0; o < O; ++o) {
    const T bv = b.valid() ? b.value()[o] : T(0);
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t bb = 0; bb < 2; ++bb) {
        const T* src = tmp.data() + (o * 4 + a * 2 + bb) * hw;
        for (std::size_t i = 0; i < H; ++i) {
          T* dst = out.data() + (o * 2 * H + 2 * i + a) * 2 * W + bb;
          for (std::size_t j = 0; j < W; ++j) dst[2 * j] = src[i * W + j] + bv;
        }
      }
    }
  }
  const int ix = x.id, iw = w.id, ib = b.valid() ? b.id : -1;
  std::vector<int> inputs{ix, iw};
  if (ib >= 0) inputs.push_back(ib);
  return tp.record(std::move(out), std::move(inputs), [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    std::vector<T> dtmp(4 * O * hw);
    for (std::size_t o = 0; o < O; ++o) {
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t bb = 0; bb < 2; ++bb) {
          T* dst = dtmp.data() + (o * 4 + a * 2 + bb) * hw;
          for (std::size_t i = 0; i < H; ++i) {
            const T* src = g.data() + (o * 2 * H + 2 * i + a) * 2 * W + bb;
            for (std::size_t j = 0; j < W; ++j) dst[i * W + j] = src[2 * j];
          }
        }
      }
    }
    if (t.requires_grad(iw)) {
      std::vector<T> dwm(4 * O * C);
      simd::gemm_nt(4 * O, C, hw, dtmp.data(), t.value(ix).data(), dwm.data(), false);
      auto& gw = t.grad_ref(iw);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t r = 0; r < 4 * O; ++r) gw[c * 4 * O + r] += dwm[r * C + c];
      }
    }
    if (ib >= 0 && t.requires_grad(ib)) {
      auto& gb = t.grad_ref(ib);
      for (std::size_t o = 0; o < O; ++o) {
        T s = T(0);
        for (std::size_t i = 0; i < 4 * hw; ++i) s += g[o * 4 * hw + i];
        gb[o] += s;
      }
    }
    if (t.requires_grad(ix)) {
      const auto wmt = transposed(wmat(t.value(iw)).data(), 4 * O, C);
      simd::gemm_nn(C, hw, 4 * O, wmt.data(), dtmp.data(), t.grad_ref(ix).data(), true);
    }
  }, "conv_transpose2x2");
}

template <class T>
Var<T> leaky_relu(Var<T> x, T slope) {
  Tensor<T> out = x.value();
  auto& tp = *x.tape;
  for (T& v : out.values()) {
    if (tp.tracking_kinks()) tp.note_kink(v > T(0) ? 1 : 0);
    if (v <= T(0)) v *= slope;
  }
  const int ix = x.id;
  return tp.record(std::move(out), {ix}, [ix, slope](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    const auto& xv = t.value(ix);
    auto& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += xv[i] > T(0) ? g[i] : slope * g[i];
  }, "leaky_relu");
}

template <class T>
Var<T> avg_pool_2x2(Var<T> x) {
  require_rank("avg_pool_2x2", x.shape(), 3);
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  if (H % 2 || W % 2) throw DimensionError("avg_pool_2x2: odd spatial shape " + shape_str(x.shape()));
  const std::size_t oh = H / 2, ow = W / 2;
  Tensor<T> out({C, oh, ow});
  const auto& xv = x.value();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t base = (c * H + 2 * i) * W + 2 * j;
        out[(c * oh + i) * ow + j] = T(0.25) * (xv[base] + xv[base + 1] + xv[base + W] + xv[base + W + 1]);
      }
    }
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    auto& gx = t.grad_ref(ix);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const T v = T(0.25) * g[(c * oh + i) * ow + j];
          const std::size_t base = (c * H + 2 * i) * W + 2 * j;
          gx[base] += v;
          gx[base + 1] += v;
          gx[base + W] += v;
          gx[base + W + 1] += v;
        }
      }
    }
  }, "avg_pool_2x2");
}

template <class T>
Var<T> upsample_nearest_2x(Var<T> x) {
  require_rank("upsample_nearest_2x", x.shape(), 3);
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  Tensor<T> out({C, 2 * H, 2 * W});
  const auto& xv = x.value();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t r = 0; r < 2 * H; ++r) {
      for (std::size_t q = 0; q < 2 * W; ++q) out[(c * 2 * H + r) * 2 * W + q] = xv[(c * H + r / 2) * W + q / 2];
    }
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    auto& gx = t.grad_ref(ix);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t r = 0; r < 2 * H; ++r) {
        for (std::size_t q = 0; q < 2 * W; ++q) gx[(c * H + r / 2) * W + q / 2] += g[(c * 2 * H + r) * 2 * W + q];
      }
    }
  }, "upsample_nearest_2x");
}

template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw DimensionError("concat_channels: no inputs");
  Tape<T>& tp = *xs[0].tape;
  Shape tail(xs[0].shape().begin() + 1, xs[0].shape().end());
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const auto& v : xs) {
    if (v.tape != &tp) throw ContractError("concat_channels: operands on different tapes");
    Shape t(v.shape().begin() + 1, v.shape().end());
    if (t != tail) shape_mismatch("concat_channels", xs[0].shape(), v.shape());
    offsets.push_back(total);
    total += v.value().numel();
    ids.push_back(v.id);
  }
  Shape out_shape = xs[0].shape();
  out_shape[0] = 0;
  for (const auto& v : xs) out_shape[0] += v.shape()[0];
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::copy(xs[i].value().values().begin(), xs[i].value().values().end(), out.data() + offsets[i]);
  }
  return tp.record(std::move(out), ids, [ids, offsets](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      auto& gi = t.grad_ref(ids[i]);
      for (std::size_t j = 0; j < gi.numel(); ++j) gi[j] += g[offsets[i] + j];
    }
  }, "concat_channels");
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw DimensionError("concat_cols: no inputs");
  Tape<T>& tp = *xs[0].tape;
  const std::size_t n = xs[0].shape().at(0);
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& v : xs) {
    require_rank("concat_cols", v.shape(), 2);
    if (v.shape()[0] != n) shape_mismatch("concat_cols", xs[0].shape(), v.shape());
    ids.push_back(v.id);
    widths.push_back(v.shape()[1]);
    total += v.shape()[1];
  }
  Tensor<T> out({n, total});
  std::size_t off = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto& v = xs[i].value();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(v.data() + r * widths[i], widths[i], out.data() + r * total + off);
    }
    off += widths[i];
  }
  return tp.record(std::move(out), ids, [ids, widths, n, total](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    std::size_t o = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (t.requires_grad(ids[i])) {
        auto& gi = t.grad_ref(ids[i]);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < widths[i]; ++c) gi[r * widths[i] + c] += g[r * total + o + c];
        }
      }
      o += widths[i];
    }
  }, "concat_cols");
}

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t len) {
  require_rank("slice_cols", x.shape(), 2);
  const std::size_t n = x.shape()[0], d = x.shape()[1];
  if (start + len > d) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") out of range for shape " + shape_str(x.shape()));
  }
  Tensor<T> out({n, len});
  for (std::size_t r = 0; r < n; ++r) std::copy_n(x.value().data() + r * d + start, len, out.data() + r * len);
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    auto& gx = t.grad_ref(ix);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < len; ++c) gx[r * d + start + c] += g[r * len + c];
    }
  }, "slice_cols");
}

template <class T>
Var<T> softmax(Var<T> x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Tensor<T> out(s);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = xv[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, xv[base + k * inner]);
      T z = T(0);
      for (std::size_t k = 0; k < n; ++k) {
        const T e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= z;
    }
  }
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    const auto& y = t.value(self);
    auto& gx = t.grad_ref(ix);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        T dotv = T(0);
        for (std::size_t k = 0; k < n; ++k) dotv += g[base + k * inner] * y[base + k * inner];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = base + k * inner;
          gx[i] += y[i] * (g[i] - dotv);
        }
      }
    }
  }, "softmax");
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  auto& tp = tape_of(x, gain, "layer_norm");
  const Shape& s = x.shape();
  if (s.empty()) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = s.back();
  const std::size_t rows = x.value().numel() / d;
  if (gain.value().numel() != d || bias.value().numel() != d) shape_mismatch("layer_norm", s, gain.shape());
  auto xhat = std::make_shared<std::vector<T>>(x.value().numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  Tensor<T> out(s);
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T mean = T(0);
    for (std::size_t j = 0; j < d; ++j) mean += xv[r * d + j];
    mean /= T(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) {
      const T c = xv[r * d + j] - mean;
      var += c * c;
    }
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xv[r * d + j] - mean) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gain.value()[j] + bias.value()[j];
    }
  }
  const int ix = x.id, ig = gain.id, ib = bias.id;
  return tp.record(std::move(out), {ix, ig, ib}, [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    const auto& gv = t.value(ig);
    if (t.requires_grad(ig) || t.requires_grad(ib)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
          if (t.requires_grad(ig)) t.grad_ref(ig)[j] += g[r * d + j] * (*xhat)[r * d + j];
          if (t.requires_grad(ib)) t.grad_ref(ib)[j] += g[r * d + j];
        }
      }
    }
    if (t.requires_grad(ix)) {
      auto& gx = t.grad_ref(ix);
      for (std::size_t r = 0; r < rows; ++r) {
        T m1 = T(0), m2 = T(0);
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = g[r * d + j] * gv[j];
          m1 += dh;
          m2 += dh * (*xhat)[r * d + j];
        }
        m1 /= T(d);
        m2 /= T(d);
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = g[r * d + j] * gv[j];
          gx[r * d + j] += (*inv_std)[r] * (dh - m1 - (*xhat)[r * d + j] * m2);
        }
      }
    }
  }, "layer_norm");
}

template <class T>
Var<T> fixed_blur(Var<T> x, const std::vector<double>& taps) {
  require_rank("fixed_blur", x.shape(), 3);
  if (taps.empty() || taps.size() % 2 == 0) throw ParameterError("fixed_blur: tap count must be odd");
  const std::size_t C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  std::vector<T> tmp(C * H * W);
  Tensor<T> out(x.shape());
  blur_pass(x.value().data(), tmp.data(), C, H, W, taps, true, false);
  blur_pass(tmp.data(), out.data(), C, H, W, taps, false, false);
  const int ix = x.id;
  return x.tape->record(std::move(out), {ix}, [=](Tape<T>& t, int self) {
    const auto& g = t.grad_ref(self);
    std::vector<T> a(C * H * W), bgrad(C * H * W);
    blur_pass(g.data(), a.data(), C, H, W, taps, false, true);
    blur_pass(a.data(), bgrad.data(), C, H, W, taps, true, true);
    auto& gx = t.grad_ref(ix);
    for (std::size_t i = 0; i < bgrad.size(); ++i) gx[i] += bgrad[i];
  }, "fixed_blur");
}

template <class T>
Var<T> masked_l1(Var<T> pred, Var<T> target, const Tensor<T>& mask, Reduction red) {
  auto& tp = tape_of(pred, target, "masked_l1");
  if (pred.shape() != target.shape()) shape_mismatch("masked_l1", pred.shape(), target.shape());
  require_rank("masked_l1", pred.shape(), 3);
  const std::size_t C = pred.shape()[0], hw = pred.shape()[1] * pred.shape()[2];
  if (mask.numel() != hw) shape_mismatch("masked_l1(mask)", pred.shape(), mask.shape());
  T count = T(0);
  for (T m : mask.values()) count += m;
  const T norm = red == Reduction::Mean ? (count > T(0) ? T(1) / (count * T(C)) : T(0)) : T(1);
  const auto& pv = pred.value();
  const auto& tv = target.value();
  T loss = T(0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < hw; ++i) {
      const T m = mask[i];
      if (m == T(0)) continue;
      const T d = pv[c * hw + i] - tv[c * hw + i];
      if (tp.tracking_kinks()) tp.note_kink(d > T(0) ? 2 : (d < T(0) ? 0 : 1));
      loss += m * std::abs(d);
    }
  }
  loss *= norm;
  const int ip = pred.id, it = target.id;
  return tp.record(Tensor<T>({1}, loss), {ip, it}, [=, mask = mask](Tape<T>& t, int self) {
    const T g = t.grad_ref(self)[0] * norm;
    if (g == T(0)) return;
    const auto& p = t.value(ip);
    const auto& q = t.value(it);
    const bool gp = t.requires_grad(ip), gt = t.requires_grad(it);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < hw; ++i) {
        const T m = mask[i];
        if (m == T(0)) continue;
        const T d = p[c * hw + i] - q[c * hw + i];
        const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        if (gp) t.grad_ref(ip)[c * hw + i] += g * m * sgn;
        if (gt) t.grad_ref(it)[c * hw + i] -= g * m * sgn;
      }
    }
  }, "masked_l1");
}

template <class T>
Var<T> l1(Var<T> pred, Var<T> target) {
  require_rank("l1", pred.shape(), 3);
  Tensor<T> ones({pred.shape()[1], pred.shape()[2]}, T(1));
  return masked_l1(pred, target, ones, Reduction::Mean);
}

#define ISPW_INSTANTIATE_OPS(T)                                                                 \
  template Var<T> add(Var<T>, Var<T>);                                                          \
  template Var<T> sub(Var<T>, Var<T>);                                                          \
  template Var<T> mul(Var<T>, Var<T>);                                                          \
  template Var<T> scalar_mul(Var<T>, T);                                                        \
  template Var<T> sum(Var<T>);                                                                  \
  template Var<T> reshape(Var<T>, Shape);                                                       \
  template Var<T> matmul(Var<T>, Var<T>);                                                       \
  template Var<T> transpose(Var<T>);                                                            \
  template Var<T> add_row_bias(Var<T>, Var<T>);                                                 \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                               \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>);                                               \
  template Var<T> conv_transpose2x2(Var<T>, Var<T>, Var<T>);                                    \
  template Var<T> leaky_relu(Var<T>, T);                                                        \
  template Var<T> avg_pool_2x2(Var<T>);                                                         \
  template Var<T> upsample_nearest_2x(Var<T>);                                                  \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                  \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                      \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                                 \
  template Var<T> softmax(Var<T>, std::size_t);                                                 \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                        \
  template Var<T> fixed_blur(Var<T>, const std::vector<double>&);                               \
  template Var<T> masked_l1(Var<T>, Var<T>, const Tensor<T>&, Reduction);                       \
  template Var<T> l1(Var<T>, Var<T>);

ISPW_INSTANTIATE_OPS(float)
ISPW_INSTANTIATE_OPS(double)

}  // namespace ispw::grad

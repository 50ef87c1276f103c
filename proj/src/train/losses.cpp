#include <cmath>

#include "ispw/events.hpp"
#include "ispw/imagecore.hpp"
#include "ispw/train.hpp"

namespace ispw::train {

namespace {

template <class T>
bool empty_mask(const Tensor<T>& mask) {
  for (T v : mask.values()) {
    if (v != T(0)) return false;
  }
  return true;
}

std::vector<double> blur_taps(int size, double sigma) {
  const auto k = gaussian_kernel(size, sigma);
  std::vector<double> taps(k.begin(), k.end());
  double total = 0.0;
  for (double t : taps) total += t;
  for (double& t : taps) t /= total;
  return taps;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {pred, map, constraint, clr_pred, reconstruct}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("loss weights must be finite and non-negative");
  }
}

template <class T>
Var<T> loss_isp(Var<T> yhat, Var<T> y_aligned, const Tensor<T>& mask_up) {
  if (empty_mask(mask_up)) events::warn("loss_isp", "all-zero mask; sample contributes no gradient");
  return grad::masked_l1(yhat, y_aligned, mask_up);
}

template <class T>
PreprocessLosses<T> loss_preprocess(Var<T> chat, Var<T> xt, Var<T> xprime, Var<T> c_aligned, const Tensor<T>& mask,
                                    int blur_size, double blur_sigma) {
  if (empty_mask(mask)) events::warn("loss_preprocess", "all-zero mask; color-map loss contributes no gradient");
  const auto taps = blur_taps(blur_size, blur_sigma);
  return {grad::masked_l1(chat, c_aligned, mask), grad::l1(grad::fixed_blur(xt, taps), grad::fixed_blur(xprime, taps))};
}

template <class T>
ColorLosses<T> loss_color_predictor(Var<T> color, Var<T> c_aligned, const Tensor<T>& mask, Var<T> recon, Var<T> raw) {
  if (empty_mask(mask)) events::warn("loss_color_predictor", "all-zero mask; color loss contributes no gradient");
  ColorLosses<T> out;
  out.clr_pred = grad::masked_l1(color, c_aligned, mask);
  if (recon.valid()) out.reconstruct = grad::l1(recon, raw);
  return out;
}

#define ISPW_INSTANTIATE_LOSSES(T)                                                                       \
  template Var<T> loss_isp(Var<T>, Var<T>, const Tensor<T>&);                                            \
  template PreprocessLosses<T> loss_preprocess(Var<T>, Var<T>, Var<T>, Var<T>, const Tensor<T>&, int, double); \
  template ColorLosses<T> loss_color_predictor(Var<T>, Var<T>, const Tensor<T>&, Var<T>, Var<T>);

ISPW_INSTANTIATE_LOSSES(float)
ISPW_INSTANTIATE_LOSSES(double)

}  // namespace ispw::train

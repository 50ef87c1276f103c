#include "ispw/metrics.hpp"

#include <cmath>
#include <json.hpp>

#include "ispw/flowwarp.hpp"
#include "ispw/imagecore.hpp"

namespace ispw {

double psnr(const RgbImage& a, const RgbImage& b) {
  require_same_dims(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = double(a.values()[i]) - double(b.values()[i]);
    se += d * d;
  }
  if (se == 0.0) return kPsnrIdentical;
  const double mse = se / double(a.size());
  return std::min(kPsnrIdentical, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<double> gray(const RgbImage& img) {
  std::vector<double> g(img.pixels());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (double(img.plane(0)[i]) + double(img.plane(1)[i]) + double(img.plane(2)[i])) / 3.0;
  }
  return g;
}

// Valid-mode separable filtering: output (h - k + 1) x (w - k + 1).
std::vector<double> filter_valid(const std::vector<double>& in, std::size_t h, std::size_t w,
                                 const std::vector<double>& k) {
  const std::size_t n = k.size(), oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += k[t] * in[r * w + c + t];
      rows[r * ow + c] = s;
    }
  }
  for (std::size_t r = 0; r < oh; ++r) {
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += k[t] * rows[(r + t) * ow + c];
      out[r * ow + c] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& opt) {
  require_same_dims(a, b, "ssim");
  const std::size_t h = a.height(), w = a.width(), n = std::size_t(opt.window);
  if (h < n || w < n) {
    throw DimensionError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                         std::to_string(n) + "x" + std::to_string(n) + " window");
  }
  const auto kf = gaussian_kernel(opt.window, opt.sigma);
  std::vector<double> k(kf.begin(), kf.end());
  double ks = 0.0;
  for (double v : k) ks += v;
  for (double& v : k) v /= ks;
  const auto x = gray(a), y = gray(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
  const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k), sxy = filter_valid(xy, h, w, k);
  const double c1 = opt.k1 * opt.k1, c2 = opt.k2 * opt.k2;
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / double(mx.size());
}

double EvalReport::mean_psnr() const {
  if (entries.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : entries) s += e.psnr;
  return s / double(entries.size());
}

double EvalReport::mean_ssim() const {
  if (entries.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : entries) s += e.ssim;
  return s / double(entries.size());
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["count"] = count();
  j["mean_psnr"] = mean_psnr();
  j["mean_ssim"] = mean_ssim();
  j["images"] = nlohmann::json::array();
  for (const auto& e : entries) j["images"].push_back({{"name", e.name}, {"psnr", e.psnr}, {"ssim", e.ssim}});
  return j.dump(2);
}

EvalEntry eval_aligned(const RgbImage& pred, const RgbImage& gt, const FlowField* flow, const std::string& name) {
  if (flow == nullptr) {
    throw ContractError("eval_aligned: a ground-truth flow is required; use a zero flow only for pre-aligned pairs");
  }
  require_same_dims(pred, gt, "eval_aligned");
  const RgbImage aligned = warp(gt, *flow);
  return {name, psnr(pred, aligned), ssim(pred, aligned)};
}

}  // namespace ispw

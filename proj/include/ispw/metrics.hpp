#pragma once

// PSNR / SSIM with MAX = 1 and evaluation against flow-aligned ground truth.

#include <string>
#include <vector>

#include "ispw/image.hpp"

namespace ispw {

/// Reported for identical images instead of +inf.
inline constexpr double kPsnrIdentical = 99.0;

double psnr(const RgbImage& a, const RgbImage& b);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over valid window positions of the channel-mean gray images.
double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& opt = {});

struct EvalEntry {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;

  void add(EvalEntry e) { entries.push_back(std::move(e)); }
  std::size_t count() const { return entries.size(); }
  double mean_psnr() const;
  double mean_ssim() const;
  /// {"count", "mean_psnr", "mean_ssim", "images": [{"name","psnr","ssim"}]}
  std::string to_json() const;
};

/// Scores pred against gt warped onto pred's grid: gt_aligned(p) = gt(p + flow(p)).
/// A null flow is a contract error; pass a zero field for pre-aligned pairs.
EvalEntry eval_aligned(const RgbImage& pred, const RgbImage& gt, const FlowField* flow, const std::string& name = "");

}  // namespace ispw

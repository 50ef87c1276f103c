#pragma once

// Ablation grids over color-map variants, loss alignment and color-predictor
// components, trained and scored on synthetic misaligned pairs.

#include <json.hpp>
#include <string>
#include <vector>

#include "ispw/pipeline.hpp"

namespace ispw::train {

struct SyntheticSplits {
  std::vector<PreparedSample> train;
  std::vector<PreparedSample> test;
};

/// Generates n_train + n_test pairs in memory. Training pairs are prepared
/// for `mode`; test pairs use their exact flows.
SyntheticSplits prepare_synthetic(std::size_t n_train, std::size_t n_test, std::uint64_t seed, const SynthConfig& synth,
                                  AlignMode mode, const FbMaskOptions& mask = {});

/// Training settings used by the acceptance checks and `ablate` defaults.
TrainConfig toy_config();

struct AblationSetup {
  SynthConfig synth;
  std::size_t n_train = 64;
  std::size_t n_test = 16;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Shared training settings; the grid overrides the ablated field.
  TrainConfig base = toy_config();
};

struct AblationRow {
  std::string variant;
  std::vector<double> psnr;  // one per seed
  std::vector<double> ssim;
  /// Colormap grid only: mean L1 residual of the closed-form fit on test pairs.
  std::vector<double> residual;

  double mean_psnr() const;
  double mean_ssim() const;
  double mean_residual() const;
};

struct AblationResult {
  std::string grid;
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& variant) const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
};

/// Row names for a grid: "colormap", "loss" or "color".
std::vector<std::string> grid_variants(const std::string& grid);

/// Trains every variant of the grid for every seed. "colormap" and "loss"
/// score F with oracle color; "color" scores G's prediction against the
/// aligned low-resolution target.
AblationResult run_ablation(const std::string& grid, const AblationSetup& setup,
                            const std::vector<std::string>& variants = {});

}  // namespace ispw::train

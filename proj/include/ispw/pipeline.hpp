#pragma once

// Sample preparation, the training loops for P+F, G and both jointly,
// checkpointed train state, inference and held-out evaluation.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ispw/datapipe.hpp"
#include "ispw/metrics.hpp"
#include "ispw/train.hpp"

namespace ispw::train {

/// One RAW/target pair with everything the losses need precomputed.
struct PreparedSample {
  std::string id;
  RawImage raw;
  /// Gamma-processed RAW and the coordinate map of the whole frame.
  RgbImage xprime;
  CoordMap coords;
  /// Full-resolution supervision target and its low-resolution color counterpart.
  RgbImage y;
  RgbImage c;
  /// RAW-resolution consistency mask (all ones unless AlignMode::Mask).
  MaskImage m;
  /// Unwarped target and exact alignment flow, kept for evaluation when known.
  RgbImage target;
  FlowField gt_flow;
};

/// NoAlign: y = target, c = downsample(target), m = 1.
/// AlignedLoss: y and c warped by the (upsampled) forward flow, m = 1.
/// Mask: as AlignedLoss with m = fb_mask(fwd, bwd).
PreparedSample prepare_sample(const std::string& id, const RawImage& raw, const RgbImage& target,
                              const FlowField* flow_fwd, const FlowField* flow_bwd, AlignMode mode,
                              const FbMaskOptions& mask = {});

/// Loads and prepares every entry of `split` ("" = all) from a manifest.
std::vector<PreparedSample> prepare_split(const Manifest& m, const std::string& split, AlignMode mode,
                                          const FbMaskOptions& mask = {});

enum class TrainMode { Isp, Color, Joint };
std::string_view mode_name(TrainMode m);
TrainMode parse_mode(std::string_view name);

/// Parameters live under "pre.", "isp." and "color.".
struct TrainState {
  TrainConfig cfg;
  TrainMode mode = TrainMode::Isp;
  ParamSet<float> params;
  AdamState adam;

  bool has_preprocess() const;
  bool has_isp() const;
  bool has_color() const;
};

/// Fresh parameters; seeds derive from cfg.seed so P, F and G are
/// initialized identically across modes.
TrainState init_state(const TrainConfig& cfg, TrainMode mode);

struct StepReport {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  /// Batch-mean of each weighted term, keyed by loss name.
  std::map<std::string, double> parts;
};

/// One optimizer step at index state.adam.step. Randomness is a function of
/// (cfg.seed, step) only, and per-sample gradients are reduced in batch order,
/// so results are independent of cfg.threads.
StepReport train_step(TrainState& state, const std::vector<PreparedSample>& data);

struct TrainOptions {
  /// Written every cfg.checkpoint_every steps and at the end when non-empty.
  std::string checkpoint_path;
  /// Called after every step.
  std::function<void(const StepReport&)> on_step;
};

/// Runs until state.adam.step == state.cfg.steps. Emits a "step" event every
/// cfg.log_every steps and a final "train_done" event.
std::vector<StepReport> run_training(TrainState& state, const std::vector<PreparedSample>& data,
                              const TrainOptions& opt = {});

/// Checkpoint at `path` plus a JSON sidecar `path + ".json"` holding the
/// config, mode and step. Adam moments are stored as "adam.m.<name>" and
/// "adam.v.<name>".
void save_state(const std::string& path, const TrainState& state);
TrainState load_state(const std::string& path);

// ---- Inference ----

struct InferenceResult {
  RgbImage xprime;
  RgbImage xtilde;
  /// Low-resolution color prediction or the supplied color image.
  RgbImage c;
  RgbImage chat;
  RgbImage yhat;
};

/// x' = gamma(raw), x~ = P(x'), c from G (or `color_image`), c^ = apply(fit(x~, c), x~),
/// y^ = F(raw, c^). `isp` must hold F; G is taken from `color` when given.
InferenceResult infer(const RawImage& raw, const TrainState& isp, const TrainState* color,
                      const RgbImage* color_image);

/// c^ for a given low-resolution color image under the state's color variant.
RgbImage color_condition(const TrainState& isp, const RgbImage& xtilde, const RgbImage& c);

/// Held-out score of F with oracle color: c is the flow-aligned downsampled
/// target, so the comparison isolates the ISP and the color-map variant.
EvalReport evaluate_isp(const TrainState& isp, const std::vector<PreparedSample>& test);

}  // namespace ispw::train

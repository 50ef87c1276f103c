#include "ispw/ablate.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "ispw/events.hpp"
#include "ispw/imagecore.hpp"

namespace ispw::train {

namespace {

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

EvalReport evaluate_color(const TrainState& st, const std::vector<PreparedSample>& test) {
  EvalReport rep;
  for (const PreparedSample& s : test) {
    const RgbImage c = models::color_predictor_forward(s.raw, s.coords, st.params, st.cfg.unet, "color.").color;
    rep.add({s.id, psnr(c, s.c), ssim(c, s.c)});
  }
  return rep;
}

}  // namespace

SyntheticSplits prepare_synthetic(std::size_t n_train, std::size_t n_test, std::uint64_t seed, const SynthConfig& synth,
                                  AlignMode mode, const FbMaskOptions& mask) {
  SyntheticSplits out;
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    const bool test = i >= n_train;
    const SynthSample s = synth_sample(i, seed, synth, test);
    PreparedSample p = test ? prepare_sample(s.id, s.raw, s.target, &s.gt_flow_raw, &s.flow_bwd, AlignMode::AlignedLoss)
                            : prepare_sample(s.id, s.raw, s.target, &s.flow_fwd, &s.flow_bwd, mode, mask);
    p.gt_flow = s.gt_flow;
    (test ? out.test : out.train).push_back(std::move(p));
  }
  return out;
}

TrainConfig toy_config() {
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch = 4;
  cfg.crop = 16;
  cfg.adam.lr = 1e-3;
  cfg.isp.rrdb_blocks = 1;
  cfg.isp.channels = 16;
  cfg.isp.growth = 8;
  cfg.unet.channels = {8, 16};
  cfg.unet.latent_count = {8, 8};
  cfg.unet.latent_dim = {16, 16};
  cfg.unet.heads = 1;
  cfg.unet.self_attn_layers = 1;
  cfg.log_every = 0;
  return cfg;
}

double AblationRow::mean_psnr() const { return mean(psnr); }
double AblationRow::mean_ssim() const { return mean(ssim); }
double AblationRow::mean_residual() const { return mean(residual); }

const AblationRow& AblationResult::row(const std::string& variant) const {
  for (const auto& r : rows) {
    if (r.variant == variant) return r;
  }
  throw ParameterError("ablation '" + grid + "' has no row '" + variant + "'");
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json j{{"grid", grid}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    nlohmann::json row{{"variant", r.variant},       {"psnr", r.psnr},          {"ssim", r.ssim},
                       {"mean_psnr", r.mean_psnr()}, {"mean_ssim", r.mean_ssim()}};
    if (!r.residual.empty()) {
      row["residual"] = r.residual;
      row["mean_residual"] = r.mean_residual();
    }
    j["rows"].push_back(row);
  }
  return j;
}

std::string AblationResult::to_markdown() const {
  const bool res = grid == "colormap";
  std::ostringstream o;
  o << std::fixed;
  o << "| variant | PSNR | SSIM |" << (res ? " fit residual |" : "") << "\n";
  o << "|---|---|---|" << (res ? "---|" : "") << "\n";
  for (const auto& r : rows) {
    o << "| " << r.variant << " | " << std::setprecision(2) << r.mean_psnr() << " | " << std::setprecision(4)
      << r.mean_ssim() << " |";
    if (res) {
      if (r.residual.empty()) {
        o << " - |";
      } else {
        o << " " << std::setprecision(5) << r.mean_residual() << " |";
      }
    }
    o << "\n";
  }
  return o.str();
}

std::vector<std::string> grid_variants(const std::string& grid) {
  if (grid == "colormap") return {"LinearMap", "ConstValMap", "AffineMapIndep", "AffineMapDep", "ColorBlur", "NoColorPred"};
  if (grid == "loss") return {"NoAlign", "AlignedLoss", "Mask"};
  if (grid == "color") return {"Full", "NoGCT", "NoReconstruct"};
  throw ParameterError("unknown ablation grid '" + grid + "' (colormap, loss, color)");
}

AblationResult run_ablation(const std::string& grid, const AblationSetup& setup, const std::vector<std::string>& variants) {
  const std::vector<std::string> all = grid_variants(grid);
  const std::vector<std::string>& names = variants.empty() ? all : variants;
  for (const auto& n : names) {
    if (std::find(all.begin(), all.end(), n) == all.end()) {
      throw ParameterError("grid '" + grid + "' has no variant '" + n + "'");
    }
  }
  if (setup.seeds.empty()) throw ParameterError("ablation needs at least one seed");
  AblationResult out;
  out.grid = grid;
  for (const auto& n : names) out.rows.push_back({n, {}, {}, {}});

  for (std::uint64_t seed : setup.seeds) {
    std::optional<SyntheticSplits> masked;
    auto data_for = [&](AlignMode mode) -> SyntheticSplits {
      if (mode == AlignMode::Mask) {
        if (!masked) masked = prepare_synthetic(setup.n_train, setup.n_test, seed, setup.synth, mode, setup.base.mask);
        return *masked;
      }
      return prepare_synthetic(setup.n_train, setup.n_test, seed, setup.synth, mode, setup.base.mask);
    };
    for (AblationRow& row : out.rows) {
      TrainConfig cfg = setup.base;
      cfg.seed = seed;
      TrainMode mode = TrainMode::Isp;
      if (grid == "colormap") {
        cfg.color_variant = row.variant;
      } else if (grid == "loss") {
        cfg.align = parse_align(row.variant);
      } else {
        mode = TrainMode::Color;
        cfg.unet.global_context = row.variant != "NoGCT";
        cfg.unet.reconstruct = row.variant != "NoReconstruct";
      }
      const SyntheticSplits data = data_for(cfg.align);
      TrainState st = init_state(cfg, mode);
      run_training(st, data.train);
      const EvalReport rep = mode == TrainMode::Color ? evaluate_color(st, data.test) : evaluate_isp(st, data.test);
      row.psnr.push_back(rep.mean_psnr());
      row.ssim.push_back(rep.mean_ssim());
      if (grid == "colormap" && cfg.color_source() != ColorSource::NoColorPred) {
        double r = 0.0;
        for (const auto& s : data.test) r += fit_residual_l1(s.xprime, s.c, fit(s.xprime, s.c, cfg.colormap_options()));
        row.residual.push_back(r / double(data.test.size()));
      }
      events::emit({{"event", "ablation_run"},
                    {"grid", grid},
                    {"variant", row.variant},
                    {"seed", seed},
                    {"psnr", rep.mean_psnr()},
                    {"ssim", rep.mean_ssim()}});
    }
  }
  return out;
}

}  // namespace ispw::train

#include <cmath>

#include "ispw/train.hpp"

namespace ispw::train {

void adam_step(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state, const AdamConfig& cfg,
               double lr_multiplier) {
  ++state.step;
  const double t = double(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
  const double lr = cfg.lr * lr_multiplier;
  for (const auto& [name, g] : grads) {
    auto& p = params.at(name);
    if (p.shape() != g.shape()) {
      throw DimensionError("adam: gradient for '" + name + "' has shape " + grad::shape_str(g.shape()) +
                           ", parameter has " + grad::shape_str(p.shape()));
    }
    if (!state.m.contains(name)) {
      state.m.add(name, Tensor<float>(p.shape()));
      state.v.add(name, Tensor<float>(p.shape()));
    }
    auto& m = state.m.at(name);
    auto& v = state.v.at(name);
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = float(mi);
      v[i] = float(vi);
      p[i] = float(double(p[i]) - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
    }
  }
}

double lr_multiplier(std::size_t epoch, std::size_t total_epochs) {
  if (total_epochs == 0) return 1.0;
  // Compare epoch / total against the breakpoints in exact integer arithmetic.
  double mult = 1.0;
  for (std::size_t pct : {50u, 75u, 90u, 95u}) {
    if (epoch * 100 >= pct * total_epochs) mult *= 0.5;
  }
  return mult;
}

}  // namespace ispw::train

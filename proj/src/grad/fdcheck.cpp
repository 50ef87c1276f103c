#include "ispw/grad/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ispw/rng.hpp"

namespace ispw::grad {

namespace {

struct Eval {
  double loss;
  std::vector<std::uint8_t> kinks;
};

Eval evaluate(const LossBuilder& fn, const ParamSet<double>& params) {
  Tape<double> tape;
  tape.enable_kink_tracking(true);
  Var<double> loss = fn(tape, params);
  if (loss.value().numel() != 1) throw ContractError("finite_diff_check: loss must be scalar");
  return {loss.value()[0], tape.kink_signature()};
}

}  // namespace

double fd_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

std::size_t FdReport::checked() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.checked;
  return n;
}

std::string FdReport::summary() const {
  std::ostringstream os;
  os << "max_rel_err=" << max_rel_err() << " checked=" << checked();
  for (const auto& p : params) {
    os << "\n  " << p.name << "[" << p.worst_index << "] err=" << p.max_rel_err << " analytic=" << p.analytic
       << " numeric=" << p.numeric << " (" << p.checked << " probed, " << p.skipped << " skipped)";
  }
  return os.str();
}

FdReport finite_diff_check(const LossBuilder& fn, const ParamSet<double>& params, const FdOptions& opt) {
  ParamSet<double> grads;
  std::vector<std::uint8_t> base_kinks;
  {
    Tape<double> tape;
    tape.enable_kink_tracking(true);
    Var<double> loss = fn(tape, params);
    base_kinks = tape.kink_signature();
    grads = tape.backward(loss);
  }
  SplitMix64 rng(opt.seed);
  ParamSet<double> work = params;
  FdReport report;
  for (const auto& [name, tensor] : params) {
    FdParamResult res;
    res.name = name;
    std::vector<std::size_t> idx(tensor.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.max_per_param != 0 && idx.size() > opt.max_per_param) {
      for (std::size_t i = 0; i < opt.max_per_param; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      }
      idx.resize(opt.max_per_param);
      std::sort(idx.begin(), idx.end());
    }
    const Tensor<double>& g = grads.contains(name) ? grads.at(name) : Tensor<double>(tensor.shape());
    auto& w = work.at(name);
    for (std::size_t i : idx) {
      const double theta = tensor[i];
      const double h = opt.rel_step * std::max(1.0, std::abs(theta));
      w[i] = theta + h;
      const Eval plus = evaluate(fn, work);
      w[i] = theta - h;
      const Eval minus = evaluate(fn, work);
      w[i] = theta;
      if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
        ++res.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * h);
      const double err = fd_relative_error(g[i], numeric);
      ++res.checked;
      if (err >= res.max_rel_err) {
        res.max_rel_err = err;
        res.worst_index = i;
        res.analytic = g[i];
        res.numeric = numeric;
      }
    }
    report.params.push_back(res);
  }
  std::stable_sort(report.params.begin(), report.params.end(),
                   [](const FdParamResult& a, const FdParamResult& b) { return a.max_rel_err > b.max_rel_err; });
  return report;
}

}  // namespace ispw::grad

#pragma once

// Central finite-difference verification of tape gradients (64-bit).

#include <functional>
#include <string>
#include <vector>

#include "ispw/grad/tape.hpp"

namespace ispw::grad {

struct FdOptions {
  /// Step is rel_step * max(1, |theta|).
  double rel_step = 1e-5;
  /// Elements probed per parameter; 0 probes every element.
  std::size_t max_per_param = 0;
  std::uint64_t seed = 0;
};

struct FdParamResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  /// Probes discarded because a perturbation crossed a leaky-ReLU or |.| kink.
  std::size_t skipped = 0;
};

struct FdReport {
  /// Sorted by max_rel_err, largest first.
  std::vector<FdParamResult> params;
  double max_rel_err() const { return params.empty() ? 0.0 : params.front().max_rel_err; }
  std::size_t checked() const;
  std::string summary() const;
};

/// Builds the loss on the given tape, reading parameters through tape.param.
using LossBuilder = std::function<Var<double>(Tape<double>&, const ParamSet<double>&)>;

/// rel err = |a - n| / max(|a|, |n|, 1e-6).
double fd_relative_error(double analytic, double numeric);

FdReport finite_diff_check(const LossBuilder& fn, const ParamSet<double>& params, const FdOptions& opt = {});

}  // namespace ispw::grad

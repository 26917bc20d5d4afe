#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "uird/nn/layers.hpp"

namespace uird::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Entries checked: all of them if there are fewer, else a random subset.
  std::size_t min_samples = 100;
  double tolerance = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

// Central-difference check of the gradient of `loss` with respect to the
// trainable entries of `params`. `loss` records a fresh computation on the
// tape it is given and returns the scalar loss node. `tamper` runs after
// the analytic backward pass and may alter gradients (negative controls).
GradCheckReport finite_diff_check(ParameterSet params, const std::function<Var(Tape&)>& loss,
                                  const GradCheckOptions& options = {},
                                  const std::function<void(ParameterSet&)>& tamper = {});

}  // namespace uird::nn

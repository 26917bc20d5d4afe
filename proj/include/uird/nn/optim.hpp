#pragma once

#include <vector>

#include "uird/nn/layers.hpp"

namespace uird::nn {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment state is keyed by position in the
// ParameterSet passed to step(), so the set must keep a stable order.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(ParameterSet& params);
  long steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::vector<Tensor> m_, v_;
  long t_ = 0;
};

}  // namespace uird::nn

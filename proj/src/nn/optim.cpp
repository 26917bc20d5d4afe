#include "uird/nn/optim.hpp"

#include <cmath>

#include "uird/error.hpp"

namespace uird::nn {

void Adam::step(ParameterSet& params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape(), 0.0);
      v_.emplace_back(p->value.shape(), 0.0);
    }
  }
  if (m_.size() != params.size()) fail(ErrorKind::Runtime, "Adam: parameter set changed size");

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable) continue;
    if (p.grad.shape() != p.value.shape() || m_[i].shape() != p.value.shape()) {
      fail(ErrorKind::Shape, "Adam: gradient/state shape mismatch for " + p.name);
    }
    double* w = p.value.ptr();
    const double* g = p.grad.ptr();
    double* m = m_[i].ptr();
    double* v = v_[i].ptr();
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace uird::nn

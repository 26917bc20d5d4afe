#include "uird/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "uird/error.hpp"
#include "uird/nn/ops.hpp"
#include "uird/rng.hpp"

namespace uird::baselines {

using nn::Tensor;
using nn::Var;

FisherInfo compute_fisher(classifier::BeatClassifier& clf, const BeatSet& beats, std::size_t n_samples,
                          std::uint64_t seed) {
  if (beats.empty()) fail(ErrorKind::Validation, "fisher: empty sample set");
  if (n_samples == 0) fail(ErrorKind::Validation, "fisher: n_samples must be positive");
  std::vector<std::size_t> pick(beats.size());
  std::iota(pick.begin(), pick.end(), 0);
  if (pick.size() > n_samples) {
    Rng rng(seed);
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(n_samples);
    std::sort(pick.begin(), pick.end());
  }

  nn::ParameterSet params = clf.parameters();
  FisherInfo info;
  for (const nn::Parameter* p : params) {
    info.names.push_back(p->name);
    info.fisher.emplace_back(p->value.shape(), 0.0);
    info.anchor.push_back(p->value);
  }
  for (std::size_t i : pick) {
    const auto& v = beats[i].values;
    const int target = static_cast<int>(clf.index_of(beats[i].label));
    nn::Tape tape;
    Var x = tape.constant(Tensor({1, 1, v.size()}, v));
    Var nll = nn::softmax_cross_entropy(clf.logits(tape, x), std::span<const int>(&target, 1));
    tape.backward(nll);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!params[k].trainable) continue;
      const Tensor& g = params[k].grad;
      Tensor& f = info.fisher[k];
      for (std::size_t j = 0; j < g.size(); ++j) f[j] += g[j] * g[j];
    }
  }
  const double n = static_cast<double>(pick.size());
  for (Tensor& f : info.fisher) {
    for (std::size_t j = 0; j < f.size(); ++j) f[j] /= n;
  }
  return info;
}

namespace {

// Fisher and anchor laid over the current shape, zero past the anchored prefix.
std::pair<Tensor, Tensor> expand(const nn::Parameter& p, const FisherInfo& a, std::size_t k) {
  const Tensor& f = a.fisher[k];
  if (a.names[k] != p.name) fail(ErrorKind::Shape, "ewc: anchor parameter '" + a.names[k] + "' does not match '" + p.name + "'");
  if (f.size() > p.value.size() || (f.rank() == 2 && f.dim(1) != p.value.dim(1)))
    fail(ErrorKind::Shape, "ewc: anchor for '" + p.name + "' does not fit the current parameter");
  Tensor fx(p.value.shape(), 0.0), ax(p.value.shape(), 0.0);
  std::copy(f.ptr(), f.ptr() + f.size(), fx.ptr());
  std::copy(a.anchor[k].ptr(), a.anchor[k].ptr() + f.size(), ax.ptr());
  return {std::move(fx), std::move(ax)};
}

void check_layout(std::size_t n_params, const FisherInfo& a) {
  if (a.fisher.size() != n_params || a.anchor.size() != n_params)
    fail(ErrorKind::Shape, "ewc: anchor has a different parameter count");
}

}  // namespace

Var ewc_penalty(nn::Tape& tape, nn::ParameterSet& params, const std::vector<FisherInfo>& anchors, double lambda) {
  Var total;
  for (const FisherInfo& a : anchors) {
    check_layout(params.size(), a);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!params[k].trainable) continue;
      auto [f, anchor] = expand(params[k], a, k);
      Var d = nn::sub(tape.parameter(params[k]), tape.constant(std::move(anchor)));
      Var term = nn::sum(nn::mul(tape.constant(std::move(f)), nn::square(d)));
      total = total.valid() ? nn::add(total, term) : term;
    }
  }
  if (!total.valid()) return total;
  return nn::scale(total, 0.5 * lambda);
}

double ewc_penalty_value(const nn::ParameterSet& params, const std::vector<FisherInfo>& anchors, double lambda) {
  double total = 0.0;
  for (const FisherInfo& a : anchors) {
    check_layout(params.size(), a);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!params[k].trainable) continue;
      auto [f, anchor] = expand(params[k], a, k);
      for (std::size_t j = 0; j < f.size(); ++j) {
        const double d = params[k].value[j] - anchor[j];
        total += f[j] * d * d;
      }
    }
  }
  return 0.5 * lambda * total;
}

classifier::Penalty make_ewc_penalty(const std::vector<FisherInfo>& anchors, double lambda) {
  return [anchors, lambda](nn::Tape& tape, nn::ParameterSet& params) { return ewc_penalty(tape, params, anchors, lambda); };
}

nn::Checkpoint fisher_checkpoint(const std::vector<FisherInfo>& anchors) {
  nn::Checkpoint c;
  c.metadata["kind"] = "ewc_anchors";
  c.metadata["count"] = std::to_string(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t k = 0; k < anchors[i].names.size(); ++k) {
      const std::string prefix = std::to_string(i) + "/" + anchors[i].names[k];
      c.tensors.emplace_back(prefix + "/fisher", anchors[i].fisher[k]);
      c.tensors.emplace_back(prefix + "/anchor", anchors[i].anchor[k]);
    }
  }
  return c;
}

}  // namespace uird::baselines

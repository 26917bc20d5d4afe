#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uird/beat.hpp"
#include "uird/classifier.hpp"

namespace uird::baselines {

// Diagonal empirical Fisher and the parameter snapshot it anchors to.
// Entries follow the classifier's ParameterSet order.
struct FisherInfo {
  std::vector<std::string> names;
  std::vector<nn::Tensor> fisher;
  std::vector<nn::Tensor> anchor;
};

// mean over samples of (d log p(y|x) / d theta)^2, on at most `n_samples`
// beats (a seeded subset when there are more).
FisherInfo compute_fisher(classifier::BeatClassifier& clf, const BeatSet& beats, std::size_t n_samples,
                          std::uint64_t seed);

// (lambda / 2) * sum over anchors and entries of F (theta - theta*)^2.
// A parameter that has grown since the anchor (a widened head) is
// penalized on its leading entries only.
nn::Var ewc_penalty(nn::Tape& tape, nn::ParameterSet& params, const std::vector<FisherInfo>& anchors, double lambda);
double ewc_penalty_value(const nn::ParameterSet& params, const std::vector<FisherInfo>& anchors, double lambda);

classifier::Penalty make_ewc_penalty(const std::vector<FisherInfo>& anchors, double lambda);

nn::Checkpoint fisher_checkpoint(const std::vector<FisherInfo>& anchors);

}  // namespace uird::baselines

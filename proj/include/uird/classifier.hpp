#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uird/beat.hpp"
#include "uird/metrics.hpp"
#include "uird/nn/checkpoint.hpp"
#include "uird/nn/layers.hpp"
#include "uird/nn/optim.hpp"

namespace uird::classifier {

struct Architecture {
  std::size_t input_length = kBeatLength;
  std::size_t conv1_channels = 8, conv1_kernel = 7;
  std::size_t conv2_channels = 16, conv2_kernel = 5;
  std::size_t stride = 2;
  std::size_t hidden1 = 128, hidden2 = 64;
  double slope = 0.2;

  // length-8 inputs for gradient checks
  static Architecture micro();
  bool operator==(const Architecture&) const = default;
};

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  nn::AdamOptions adam{1e-3};
  // Each epoch draws every class up to the largest class count.
  bool balanced = true;
  // Off for sequential fine-tuning, where only the newest class has data.
  bool require_all_classes = true;
};

// Extra loss term recorded on the same tape as the cross-entropy. It binds
// parameters with tape.parameter(); returning an invalid Var adds nothing.
using Penalty = std::function<nn::Var(nn::Tape&, nn::ParameterSet&)>;

struct Prediction {
  char symbol = '?';
  std::size_t index = 0;
  std::vector<double> probabilities;
};

// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values);

class BeatClassifier {
 public:
  BeatClassifier() = default;
  BeatClassifier(std::string class_symbols, const Architecture& arch, std::uint64_t seed);

  const std::string& classes() const { return classes_; }
  std::size_t width() const { return classes_.size(); }
  const Architecture& architecture() const { return arch_; }
  bool trained() const { return trained_; }
  nn::Sequential& network() { return net_; }
  nn::ParameterSet parameters() { return net_.parameters(); }
  // Index of a symbol; throws when unknown.
  std::size_t index_of(char symbol) const;

  // Appends a class with freshly initialized output rows.
  void add_class(char symbol, std::uint64_t seed);

  nn::Var logits(nn::Tape& tape, nn::Var x, nn::Binding binding = nn::Binding::Trainable);
  // Mean cross-entropy over the batch, plus the penalty when given.
  nn::Var loss(nn::Tape& tape, const nn::Tensor& batch, std::span<const int> targets, const Penalty& penalty = {});

  // Mean loss per epoch.
  std::vector<double> train(const BeatSet& beats, const TrainOptions& options, std::uint64_t seed,
                            const Penalty& penalty = {});

  std::vector<double> raw_logits(std::span<const double> beat) const;
  Prediction predict(std::span<const double> beat) const;
  std::vector<Prediction> predict(const BeatSet& beats) const;
  metrics::TaskReport evaluate(const BeatSet& beats, int task, const std::string& strategy) const;

  nn::Checkpoint to_checkpoint() const;
  static BeatClassifier from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  std::vector<int> targets_of(const BeatSet& beats) const;

  Architecture arch_;
  std::string classes_;
  nn::Sequential net_;
  bool trained_ = false;
};

// beat_index,true,predicted,p_0..p_{C-1}
std::string format_predictions(const BeatClassifier& clf, const BeatSet& beats);

}  // namespace uird::classifier

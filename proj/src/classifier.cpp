#include "uird/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "uird/error.hpp"
#include "uird/io.hpp"
#include "uird/madegan.hpp"
#include "uird/nn/ops.hpp"
#include "uird/rng.hpp"

namespace uird::classifier {

using nn::LayerSpec;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::size_t kPredictBatch = 256;

enum Purpose : std::uint64_t { kInit = 1, kShuffle };

nn::Sequential build(const Architecture& a, std::size_t width, std::uint64_t seed) {
  std::vector<LayerSpec> s{
      LayerSpec::conv1d(a.conv1_channels, a.conv1_kernel, a.stride, 0),
      LayerSpec::leaky_relu(a.slope),
      LayerSpec::conv1d(a.conv2_channels, a.conv2_kernel, a.stride, 0),
      LayerSpec::leaky_relu(a.slope),
      LayerSpec::flatten(),
      LayerSpec::dense(a.hidden1),
      LayerSpec::leaky_relu(a.slope),
      LayerSpec::dense(a.hidden2),
      LayerSpec::leaky_relu(a.slope),
      LayerSpec::dense(width),
  };
  return nn::Sequential("classifier", {1, a.input_length}, s, seed);
}

Tensor beats_tensor(const BeatSet& beats, std::span<const std::size_t> order, std::size_t begin, std::size_t end) {
  return madegan::batch_tensor(beats, order, begin, end);
}

std::size_t meta_size(const nn::Checkpoint& c, const std::string& key) { return std::stoul(c.meta(key)); }

}  // namespace

Architecture Architecture::micro() {
  Architecture a;
  a.input_length = 8;
  a.conv1_channels = 2;
  a.conv1_kernel = 3;
  a.conv2_channels = 3;
  a.conv2_kernel = 2;
  a.hidden1 = 4;
  a.hidden2 = 3;
  return a;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::Validation, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

BeatClassifier::BeatClassifier(std::string class_symbols, const Architecture& arch, std::uint64_t seed)
    : arch_(arch), classes_(std::move(class_symbols)) {
  if (classes_.empty()) fail(ErrorKind::Validation, "classifier: no classes");
  std::string sorted = classes_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    fail(ErrorKind::Validation, "classifier: duplicate class symbol in '" + classes_ + "'");
  net_ = build(arch, classes_.size(), derive_seed(seed, 0, kInit));
}

std::size_t BeatClassifier::index_of(char symbol) const {
  const std::size_t i = classes_.find(symbol);
  if (i == std::string::npos) fail(ErrorKind::Validation, std::string("classifier: unknown label '") + symbol + "'");
  return i;
}

void BeatClassifier::add_class(char symbol, std::uint64_t seed) {
  if (classes_.find(symbol) != std::string::npos)
    fail(ErrorKind::Validation, std::string("classifier: class '") + symbol + "' already present");
  classes_ += symbol;
  net_.resize_output(classes_.size(), seed);
}

Var BeatClassifier::logits(nn::Tape& tape, Var x, nn::Binding binding) {
  return net_.forward(tape, x, nn::Mode::Train, binding);
}

Var BeatClassifier::loss(nn::Tape& tape, const Tensor& batch, std::span<const int> targets, const Penalty& penalty) {
  Var l = nn::softmax_cross_entropy(logits(tape, tape.constant(batch)), targets);
  if (penalty) {
    nn::ParameterSet params = parameters();
    Var p = penalty(tape, params);
    if (p.valid()) l = nn::add(l, p);
  }
  return l;
}

std::vector<int> BeatClassifier::targets_of(const BeatSet& beats) const {
  std::vector<int> t;
  t.reserve(beats.size());
  for (const Beat& b : beats) t.push_back(static_cast<int>(index_of(b.label)));
  return t;
}

std::vector<double> BeatClassifier::train(const BeatSet& beats, const TrainOptions& options, std::uint64_t seed,
                                          const Penalty& penalty) {
  if (options.batch_size == 0) fail(ErrorKind::Validation, "classifier: batch_size must be positive");
  const std::vector<int> targets = targets_of(beats);
  std::vector<std::vector<std::size_t>> by_class(classes_.size());
  for (std::size_t i = 0; i < beats.size(); ++i) {
    if (beats[i].values.size() != arch_.input_length)
      fail(ErrorKind::Shape, "classifier: beat length " + std::to_string(beats[i].values.size()) +
                                 " does not match input " + std::to_string(arch_.input_length));
    by_class[static_cast<std::size_t>(targets[i])].push_back(i);
  }
  if (beats.empty()) fail(ErrorKind::Validation, "classifier: empty training set");
  for (std::size_t c = 0; c < classes_.size() && options.require_all_classes; ++c) {
    if (by_class[c].empty()) fail(ErrorKind::Validation, std::string("classifier: no training samples for class '") + classes_[c] + "'");
  }
  std::size_t largest = 0;
  for (const auto& ix : by_class) largest = std::max(largest, ix.size());

  nn::Adam opt(options.adam);
  nn::ParameterSet params = parameters();
  Rng rng(derive_seed(seed, 0, kShuffle));
  std::vector<double> trace;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<std::size_t> order;
    if (options.balanced) {
      // Each class cycles through fresh permutations of itself up to `largest`.
      for (auto ix : by_class) {
        if (ix.empty()) continue;
        std::size_t taken = 0;
        while (taken < largest) {
          std::shuffle(ix.begin(), ix.end(), rng);
          const std::size_t n = std::min(ix.size(), largest - taken);
          order.insert(order.end(), ix.begin(), ix.begin() + static_cast<std::ptrdiff_t>(n));
          taken += n;
        }
      }
    } else {
      order.resize(beats.size());
      std::iota(order.begin(), order.end(), 0);
    }
    std::shuffle(order.begin(), order.end(), rng);

    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      std::vector<int> t;
      for (std::size_t i = begin; i < end; ++i) t.push_back(targets[order[i]]);
      nn::Tape tape;
      Var l = loss(tape, beats_tensor(beats, order, begin, end), t, penalty);
      const double v = l.value()[0];
      if (!std::isfinite(v))
        fail(ErrorKind::Divergence, "classifier: loss became non-finite at epoch " + std::to_string(epoch));
      tape.backward(l);
      opt.step(params);
      total += v;
      ++batches;
    }
    trace.push_back(total / static_cast<double>(std::max<std::size_t>(1, batches)));
  }
  trained_ = true;
  return trace;
}

std::vector<double> BeatClassifier::raw_logits(std::span<const double> beat) const {
  if (beat.size() != arch_.input_length) fail(ErrorKind::Shape, "classifier: beat length does not match input");
  nn::Tape tape;
  Var x = tape.constant(Tensor({1, 1, beat.size()}, std::vector<double>(beat.begin(), beat.end())));
  return net_.forward(tape, x).value().vec();
}

Prediction BeatClassifier::predict(std::span<const double> beat) const {
  BeatSet one(1);
  one[0].values.assign(beat.begin(), beat.end());
  return predict(one)[0];
}

std::vector<Prediction> BeatClassifier::predict(const BeatSet& beats) const {
  std::vector<Prediction> out;
  out.reserve(beats.size());
  const std::size_t c = classes_.size();
  for (std::size_t begin = 0; begin < beats.size(); begin += kPredictBatch) {
    const std::size_t end = std::min(beats.size(), begin + kPredictBatch);
    std::vector<std::size_t> order(end - begin);
    std::iota(order.begin(), order.end(), begin);
    const Tensor x = beats_tensor(beats, order, 0, order.size());
    if (x.dim(2) != arch_.input_length) fail(ErrorKind::Shape, "classifier: beat length does not match input");
    nn::Tape tape;
    Var probs = nn::softmax_rows(net_.forward(tape, tape.constant(x)));
    for (std::size_t i = 0; i < order.size(); ++i) {
      Prediction p;
      p.probabilities.assign(probs.value().ptr() + i * c, probs.value().ptr() + (i + 1) * c);
      p.index = argmax(p.probabilities);
      p.symbol = classes_[p.index];
      out.push_back(std::move(p));
    }
  }
  return out;
}

metrics::TaskReport BeatClassifier::evaluate(const BeatSet& beats, int task, const std::string& strategy) const {
  const std::vector<int> truth = targets_of(beats);
  std::vector<int> pred;
  for (const auto& p : predict(beats)) pred.push_back(static_cast<int>(p.index));
  return metrics::make_report(task, strategy, classes_, metrics::confusion_from(truth, pred, classes_.size()));
}

nn::Checkpoint BeatClassifier::to_checkpoint() const {
  nn::Checkpoint c;
  c.metadata["kind"] = "classifier";
  c.metadata["classes"] = classes_;
  c.metadata["input_length"] = std::to_string(arch_.input_length);
  c.metadata["conv1"] = std::to_string(arch_.conv1_channels) + "," + std::to_string(arch_.conv1_kernel);
  c.metadata["conv2"] = std::to_string(arch_.conv2_channels) + "," + std::to_string(arch_.conv2_kernel);
  c.metadata["stride"] = std::to_string(arch_.stride);
  c.metadata["hidden1"] = std::to_string(arch_.hidden1);
  c.metadata["hidden2"] = std::to_string(arch_.hidden2);
  c.metadata["slope"] = format_double(arch_.slope);
  c.metadata["trained"] = trained_ ? "1" : "0";
  for (const nn::Parameter* p : net_.parameters()) c.tensors.emplace_back(p->name, p->value);
  return c;
}

BeatClassifier BeatClassifier::from_checkpoint(const nn::Checkpoint& c) {
  if (c.meta("kind") != "classifier") fail(ErrorKind::Parse, "checkpoint is not a classifier");
  Architecture a;
  a.input_length = meta_size(c, "input_length");
  auto pair = [&](const std::string& key, std::size_t& ch, std::size_t& k) {
    const std::string& v = c.meta(key);
    const auto comma = v.find(',');
    if (comma == std::string::npos) fail(ErrorKind::Parse, "classifier checkpoint: bad " + key);
    ch = std::stoul(v.substr(0, comma));
    k = std::stoul(v.substr(comma + 1));
  };
  pair("conv1", a.conv1_channels, a.conv1_kernel);
  pair("conv2", a.conv2_channels, a.conv2_kernel);
  a.stride = meta_size(c, "stride");
  a.hidden1 = meta_size(c, "hidden1");
  a.hidden2 = meta_size(c, "hidden2");
  if (!parse_double(c.meta("slope"), a.slope)) fail(ErrorKind::Parse, "classifier checkpoint: bad slope");
  BeatClassifier clf(c.meta("classes"), a, 0);
  nn::ParameterSet params = clf.parameters();
  nn::import_parameters(params, c);
  clf.trained_ = c.meta("trained") == "1";
  return clf;
}

std::string format_predictions(const BeatClassifier& clf, const BeatSet& beats) {
  std::string out = "beat_index,true,predicted";
  for (std::size_t c = 0; c < clf.width(); ++c) out += ",p_" + std::to_string(c);
  out += "\n";
  const auto preds = clf.predict(beats);
  for (std::size_t i = 0; i < beats.size(); ++i) {
    out += std::to_string(i) + "," + beats[i].label + "," + preds[i].symbol;
    for (double p : preds[i].probabilities) out += "," + format_double(p);
    out += "\n";
  }
  return out;
}

}  // namespace uird::classifier

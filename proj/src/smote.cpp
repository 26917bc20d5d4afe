#include "uird/smote.hpp"

#include <algorithm>
#include <numeric>

#include "uird/error.hpp"
#include "uird/rng.hpp"

namespace uird::smote {

std::vector<std::size_t> knn(std::span<const double> query, const std::vector<std::vector<double>>& store,
                             std::size_t k, std::optional<std::size_t> exclude) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (exclude && *exclude == i) continue;
    if (store[i].size() != query.size()) fail(ErrorKind::Shape, "knn: dimension mismatch");
    double d = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) {
      const double t = store[i][j] - query[j];
      d += t * t;
    }
    dist.emplace_back(d, i);
  }
  k = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

Generator Generator::fit(const BeatSet& class_beats, std::size_t k) {
  if (class_beats.empty()) fail(ErrorKind::Validation, "smote: cannot fit an empty class");
  if (k < 1) fail(ErrorKind::Validation, "smote: k must be at least 1");
  Generator g;
  g.symbol_ = class_beats.front().label;
  g.k_ = k;
  const std::size_t dim = class_beats.front().values.size();
  for (const Beat& b : class_beats) {
    if (b.label != g.symbol_) fail(ErrorKind::Validation, "smote: mixed labels in one class store");
    if (b.values.size() != dim) fail(ErrorKind::Shape, "smote: beats differ in length");
    g.store_.push_back(b.values);
  }
  const std::size_t keff = g.effective_k();
  g.neighbours_.resize(g.store_.size());
  for (std::size_t i = 0; i < g.store_.size() && keff > 0; ++i) g.neighbours_[i] = knn(g.store_[i], g.store_, keff, i);
  return g;
}

BeatSet Generator::synthesize(std::size_t count, std::uint64_t seed, std::vector<Draw>* draws) const {
  if (store_.empty()) fail(ErrorKind::Runtime, "smote: generator was never fitted");
  Rng rng(seed);
  BeatSet out;
  out.reserve(count);
  if (draws) draws->clear();
  std::normal_distribution<double> jitter(0.0, kJitterSigma);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t parent = n % store_.size();
    Beat b;
    b.label = symbol_;
    b.standardized = true;
    b.synthetic = true;
    Draw d{parent, parent, 0.0};
    if (jitter_mode()) {
      b.values = store_[0];
      for (double& v : b.values) v += jitter(rng);
    } else {
      const auto& nb = neighbours_[parent];
      d.neighbour = nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)];
      d.lambda = uniform_closed(rng);
      const auto& x = store_[parent];
      const auto& y = store_[d.neighbour];
      b.values.resize(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) b.values[j] = x[j] + d.lambda * (y[j] - x[j]);
    }
    if (draws) draws->push_back(d);
    out.push_back(std::move(b));
  }
  return out;
}

nn::Checkpoint Generator::to_checkpoint() const {
  nn::Checkpoint c;
  c.metadata["kind"] = "smote";
  c.metadata["class"] = std::string(1, symbol_);
  c.metadata["k"] = std::to_string(k_);
  const std::size_t dim = store_.empty() ? 0 : store_.front().size();
  nn::Tensor t({store_.size(), dim});
  for (std::size_t i = 0; i < store_.size(); ++i) std::copy(store_[i].begin(), store_[i].end(), t.ptr() + i * dim);
  c.tensors.emplace_back("store", std::move(t));
  return c;
}

Generator Generator::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.meta("kind") != "smote") fail(ErrorKind::Parse, "checkpoint is not a SMOTE generator");
  const std::string symbol = ckpt.meta("class");
  if (symbol.size() != 1) fail(ErrorKind::Parse, "generator checkpoint: bad class symbol");
  const nn::Tensor& t = ckpt.tensor("store");
  if (t.rank() != 2) fail(ErrorKind::Parse, "generator checkpoint: store must be 2-D");
  BeatSet beats(t.dim(0));
  for (std::size_t i = 0; i < beats.size(); ++i) {
    beats[i].label = symbol[0];
    beats[i].standardized = true;
    beats[i].values.assign(t.ptr() + i * t.dim(1), t.ptr() + (i + 1) * t.dim(1));
  }
  return fit(beats, std::stoul(ckpt.meta("k")));
}

void GeneratorBank::add(Generator g) {
  if (find(g.class_symbol())) fail(ErrorKind::Validation, std::string("generator bank already has class ") + g.class_symbol());
  generators_.push_back(std::move(g));
}

const Generator* GeneratorBank::find(char symbol) const {
  for (const Generator& g : generators_) {
    if (g.class_symbol() == symbol) return &g;
  }
  return nullptr;
}

std::string GeneratorBank::symbols() const {
  std::string s;
  for (const Generator& g : generators_) s += g.class_symbol();
  return s;
}

BeatSet synthesize_bank(const GeneratorBank& bank, std::span<const std::size_t> counts, std::uint64_t seed) {
  if (counts.size() != bank.size()) fail(ErrorKind::Validation, "synthesize_bank: one count per generator required");
  BeatSet out;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    BeatSet part = bank[i].synthesize(counts[i], splitmix64(seed + i));
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace uird::smote

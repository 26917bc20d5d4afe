#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "uird/beat.hpp"
#include "uird/nn/checkpoint.hpp"

namespace uird::smote {

// Indices of the k stored vectors nearest to `query` (Euclidean), nearest
// first, equal distances in ascending index order. `exclude` removes the
// query's own slot when it is itself a member of the store.
std::vector<std::size_t> knn(std::span<const double> query, const std::vector<std::vector<double>>& store,
                             std::size_t k, std::optional<std::size_t> exclude = std::nullopt);

// How one pseudo sample was made: parent + lambda * (neighbour - parent).
struct Draw {
  std::size_t parent = 0;
  std::size_t neighbour = 0;
  double lambda = 0.0;
};

class Generator {
 public:
  static constexpr double kJitterSigma = 0.01;

  Generator() = default;
  // Stores the vectors as given; the pipeline passes standardized beats.
  static Generator fit(const BeatSet& class_beats, std::size_t k = 5);

  char class_symbol() const { return symbol_; }
  std::size_t k() const { return k_; }
  std::size_t effective_k() const { return store_.size() > 1 ? std::min(k_, store_.size() - 1) : 0; }
  bool jitter_mode() const { return store_.size() == 1; }
  const std::vector<std::vector<double>>& store() const { return store_; }
  const std::vector<std::size_t>& neighbours(std::size_t i) const { return neighbours_.at(i); }

  // Exactly `count` pseudo beats labelled with the class symbol and
  // flagged synthetic. Parents cycle round-robin through the store.
  BeatSet synthesize(std::size_t count, std::uint64_t seed, std::vector<Draw>* draws = nullptr) const;

  nn::Checkpoint to_checkpoint() const;
  static Generator from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  char symbol_ = '?';
  std::size_t k_ = 5;
  std::vector<std::vector<double>> store_;
  std::vector<std::vector<std::size_t>> neighbours_;
};

// Generators in class-introduction order.
class GeneratorBank {
 public:
  void add(Generator g);
  std::size_t size() const { return generators_.size(); }
  bool empty() const { return generators_.empty(); }
  const Generator& operator[](std::size_t i) const { return generators_.at(i); }
  const Generator* find(char symbol) const;
  std::string symbols() const;

 private:
  std::vector<Generator> generators_;
};

// counts[i] samples from bank[i], concatenated in bank order.
BeatSet synthesize_bank(const GeneratorBank& bank, std::span<const std::size_t> counts, std::uint64_t seed);

}  // namespace uird::smote

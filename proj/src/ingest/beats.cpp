#include <algorithm>
#include <cmath>
#include <map>

#include "uird/error.hpp"
#include "uird/ingest.hpp"
#include "uird/rng.hpp"

namespace uird::ingest {

SegmentResult segment_beats(const RawSignal& signal, std::span<const std::size_t> peaks,
                            std::span<const Annotation> annotations, double match_window_s) {
  std::vector<Annotation> sorted(annotations.begin(), annotations.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Annotation& a, const Annotation& b) { return a.sample_index < b.sample_index; });
  const std::size_t tol = static_cast<std::size_t>(std::lround(match_window_s * signal.sampling_rate_hz));
  const std::size_t n = signal.samples.size();

  SegmentResult out;
  for (std::size_t peak : peaks) {
    if (peak < kBeatHalfWindow || peak + kBeatHalfWindow > n) {
      ++out.dropped_boundary;
      continue;
    }
    auto it = std::lower_bound(sorted.begin(), sorted.end(), peak,
                               [](const Annotation& a, std::size_t p) { return a.sample_index < p; });
    const Annotation* best = nullptr;
    std::size_t best_dist = 0;
    // Earlier neighbour first so it wins a tie.
    if (it != sorted.begin()) {
      const Annotation& a = *std::prev(it);
      best = &a;
      best_dist = peak - a.sample_index;
    }
    if (it != sorted.end()) {
      const std::size_t d = it->sample_index - peak;
      if (!best || d < best_dist) {
        best = &*it;
        best_dist = d;
      }
    }
    if (!best || best_dist > tol) {
      ++out.dropped_unlabeled;
      continue;
    }
    Beat beat;
    beat.label = best->symbol;
    beat.r_peak_index = static_cast<long>(peak);
    beat.values.assign(signal.samples.begin() + static_cast<long>(peak - kBeatHalfWindow),
                       signal.samples.begin() + static_cast<long>(peak + kBeatHalfWindow));
    out.beats.push_back(std::move(beat));
  }
  return out;
}

Beat standardize(Beat beat) {
  const std::size_t n = beat.values.size();
  if (n == 0) fail(ErrorKind::Validation, "standardize: empty beat");
  double mean = 0.0;
  for (double v : beat.values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : beat.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  beat.standardized = true;
  if (!(sd >= 1e-8)) {
    std::fill(beat.values.begin(), beat.values.end(), 0.0);
    beat.degenerate = true;
    return beat;
  }
  for (double& v : beat.values) v = (v - mean) / sd;
  beat.degenerate = false;
  return beat;
}

std::pair<BeatSet, BeatSet> split_train_test(const BeatSet& beats, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) fail(ErrorKind::Validation, "split ratio must be in [0, 1]");
  std::map<char, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < beats.size(); ++i) by_label[beats[i].label].push_back(i);

  std::vector<bool> to_train(beats.size(), false);
  for (auto& [label, idx] : by_label) {
    Rng rng(splitmix64(seed ^ static_cast<unsigned char>(label)));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_train; ++k) to_train[idx[k]] = true;
  }
  std::pair<BeatSet, BeatSet> out;
  for (std::size_t i = 0; i < beats.size(); ++i) (to_train[i] ? out.first : out.second).push_back(beats[i]);
  return out;
}

}  // namespace uird::ingest

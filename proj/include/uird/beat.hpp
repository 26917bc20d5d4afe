#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace uird {

inline constexpr std::size_t kBeatLength = 320;
inline constexpr std::size_t kBeatHalfWindow = kBeatLength / 2;

// One cardiac cycle: a fixed-length window centred on its R-peak.
struct Beat {
  std::vector<double> values;
  char label = '?';
  long r_peak_index = -1;
  bool standardized = false;
  // Set by standardize() when the window was flat and came back all zeros.
  bool degenerate = false;
  // Pseudo-replay sample produced by a generator, not a recorded beat.
  bool synthetic = false;
};

using BeatSet = std::vector<Beat>;

// Ordered, duplicate-free set of class symbols, e.g. "NLRVAf".
std::string normalize_alphabet(const std::string& symbols);
bool in_alphabet(const std::string& alphabet, char symbol);

// Beats in `beats` carrying `label`, in order.
BeatSet select_label(const BeatSet& beats, char label);

}  // namespace uird

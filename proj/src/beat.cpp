#include "uird/beat.hpp"

#include <algorithm>

namespace uird {

std::string normalize_alphabet(const std::string& symbols) {
  std::string out;
  for (char c : symbols) {
    if (c == ' ' || c == ',') continue;
    if (out.find(c) == std::string::npos) out += c;
  }
  return out;
}

bool in_alphabet(const std::string& alphabet, char symbol) {
  return alphabet.find(symbol) != std::string::npos;
}

BeatSet select_label(const BeatSet& beats, char label) {
  BeatSet out;
  std::copy_if(beats.begin(), beats.end(), std::back_inserter(out),
               [label](const Beat& b) { return b.label == label; });
  return out;
}

}  // namespace uird

#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "uird/beat.hpp"
#include "uird/ingest.hpp"

namespace uird::synth {

// Beat templates are sums of Gaussian bumps placed relative to the R-peak.
struct Bump {
  double offset;  // samples from the R-peak
  double amplitude;
  double width;  // standard deviation in samples
};

// Classes with a template: N, L, R, V, A, f.
std::string known_classes();
const std::vector<Bump>& template_for(char label);

struct BeatJitter {
  double amplitude = 0.10;   // relative, uniform +-
  double width = 0.10;       // relative, uniform +-
  double shift = 4.0;        // samples, uniform +-
  double baseline = 0.05;    // additive offset, uniform +-
  double noise = 0.03;       // white noise std
};

// Noise-free template evaluated over one beat window.
std::vector<double> render_template(char label, std::size_t length = kBeatLength);

// `counts[label]` raw (unstandardized) beats per class, grouped in
// alphabet order of the map keys. Deterministic for a given seed.
BeatSet make_beats(const std::map<char, std::size_t>& counts, std::uint64_t seed,
                   const BeatJitter& jitter = {}, std::size_t length = kBeatLength);

struct Record {
  ingest::RawSignal signal;
  std::vector<ingest::Annotation> annotations;
};

// Continuous record: beats of the requested classes in shuffled order at
// RR ~ 0.8 s, on a slow baseline wander, annotated at each R-peak.
Record make_record(const std::map<char, std::size_t>& counts, std::uint64_t seed,
                   double sampling_rate_hz = 360.0, const BeatJitter& jitter = {});

struct PulseTrain {
  ingest::RawSignal signal;
  std::vector<std::size_t> centers;
};

// Gaussian-derivative pulses -(t-c)/s * exp(1/2 - (t-c)^2 / 2s^2) at
// c = 0.5 + k / rate seconds; unit peak just before each centre. Optional
// white noise at the given SNR (signal power averaged over the record).
PulseTrain make_pulse_train(std::size_t pulses = 30, double rate_hz = 1.0, double sampling_rate_hz = 360.0,
                            double sigma_s = 0.01,
                            double snr_db = std::numeric_limits<double>::infinity(),
                            std::uint64_t seed = 0);

}  // namespace uird::synth

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uird/beat.hpp"

namespace uird::ingest {

struct RawSignal {
  std::vector<double> samples;
  double sampling_rate_hz = 360.0;
  int channel_id = 0;
  std::string source_name;
};

struct Annotation {
  std::size_t sample_index = 0;
  char symbol = '?';
};

// ---- WFDB format 212 ------------------------------------------------------

// Header values for a 212 byte stream; normally read from the record's .hea.
struct Wfdb212Layout {
  int n_channels = 2;
  std::vector<double> gains{200.0, 200.0};
  std::vector<double> baselines{0.0, 0.0};
  double sampling_rate_hz = 360.0;
  std::string source_name;
};

// Two 12-bit two's-complement samples packed into three bytes:
// A = byte0 | (byte1 & 0x0F) << 8, B = byte2 | (byte1 & 0xF0) << 4.
std::pair<int, int> decode_212_frame(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2);
std::array<std::uint8_t, 3> encode_212_frame(int a, int b);

// Decodes and de-interleaves channels; physical = (raw - baseline) / gain.
std::vector<RawSignal> parse_wfdb212(std::span<const std::uint8_t> bytes, const Wfdb212Layout& layout);
// Inverse of the raw decode: channels of equal length, values in [-2048, 2047].
// A single channel of odd length is padded with one zero sample.
std::vector<std::uint8_t> encode_wfdb212(const std::vector<std::vector<int>>& channels);

// ---- Text formats -----------------------------------------------------------

// `sample_index,symbol` per line; blank lines and lines starting with '#' skipped.
std::vector<Annotation> parse_annotations(const std::string& text);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

// `label,v1,...,vN` per line, optionally followed by `synthetic=0|1`.
// An empty alphabet accepts any single-character label.
BeatSet parse_beatset_csv(const std::string& text, const std::string& alphabet = {},
                          std::size_t length = kBeatLength);
BeatSet load_beatset_csv(const std::filesystem::path& path, const std::string& alphabet = {},
                         std::size_t length = kBeatLength);
std::string format_beatset_csv(const BeatSet& beats, bool with_synthetic_column = false);
void save_beatset_csv(const std::filesystem::path& path, const BeatSet& beats,
                      bool with_synthetic_column = false);

// ---- Filtering and detection ------------------------------------------------

// Linear-phase windowed-sinc high-pass: spectral inversion of a
// Hamming-windowed low-pass with unit DC gain. `taps` must be odd.
std::vector<double> design_highpass_fir(double cutoff_hz, double sampling_rate_hz, std::size_t taps);
// Zero-padded convolution with the group delay removed, so output aligns
// with input sample for sample.
RawSignal highpass_fir(const RawSignal& signal, double cutoff_hz = 0.5, std::size_t order = 101);

struct PanTompkinsOptions {
  double band_low_hz = 5.0;
  double band_high_hz = 15.0;
  double integration_window_s = 0.150;
  double refractory_s = 0.200;
  double t_wave_window_s = 0.360;
  double searchback_factor = 1.66;
  double refine_window_s = 0.050;
};

// Offline Pan-Tompkins QRS detection. Returns R-peak sample indices in
// increasing order, each moved to the largest input sample within the
// refinement window around the detection.
std::vector<std::size_t> detect_r_peaks(const RawSignal& signal, const PanTompkinsOptions& options = {});

// ---- Beats ------------------------------------------------------------------

struct SegmentResult {
  BeatSet beats;
  std::size_t dropped_boundary = 0;
  std::size_t dropped_unlabeled = 0;
};

// One beat per peak whose window [peak-160, peak+160) lies inside the record
// and which has an annotation within `match_window_s`; the nearest
// annotation labels the beat, ties going to the earlier one.
SegmentResult segment_beats(const RawSignal& signal, std::span<const std::size_t> peaks,
                            std::span<const Annotation> annotations, double match_window_s = 0.050);

// Per-beat z-score with population std. Flat beats (std < 1e-8) come back
// as zeros with `degenerate` set.
Beat standardize(Beat beat);

// Stratified by label, reproducible for a given seed. Each class sends
// round(ratio * count) beats to train; both halves keep input order.
std::pair<BeatSet, BeatSet> split_train_test(const BeatSet& beats, double ratio, std::uint64_t seed);

}  // namespace uird::ingest

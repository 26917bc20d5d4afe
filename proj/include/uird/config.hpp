#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "uird/ingest.hpp"
#include "uird/pipeline.hpp"
#include "uird/synth.hpp"

namespace uird::config {

struct DataSource {
  // "synthetic" or "beatset_csv"
  std::string format = "synthetic";
  std::map<char, std::size_t> counts;
  std::uint64_t seed = 0;
  synth::BeatJitter jitter{};
  // beatset_csv: either `paths` (split here) or pre-split train/test files.
  std::vector<std::filesystem::path> paths;
  std::filesystem::path train, test;
};

struct IngestRecord {
  std::filesystem::path signal, annotations;
  ingest::Wfdb212Layout layout{};
  int channel = 0;
};

struct IngestConfig {
  std::vector<IngestRecord> records;
  double highpass_cutoff_hz = 0.5;
  std::size_t fir_order = 101;
  // Use annotation positions as R-peaks instead of running the detector.
  bool annotation_peaks = false;
  double match_window_s = 0.05;
  ingest::PanTompkinsOptions detector{};
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::string preset = "desk";
  std::string alphabet = "NLRVAf";
  std::string order;  // empty: by sample size
  DataSource data;
  IngestConfig ingest;
  pipeline::PipelineConfig pipeline;
  // Effective document after overrides; copied into manifests.
  nlohmann::json document;
};

// `key.path=value`; the value is read as JSON when it parses, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Relative paths resolve against `base_dir`. Unknown keys, out-of-range
// values, a missing seed and missing input files are Validation errors.
RunConfig parse(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
RunConfig load_text(const std::string& text, const std::filesystem::path& base_dir,
                    const std::vector<std::string>& overrides = {});

// Beats as described by `data`, standardized.
BeatSet load_beats(const RunConfig& cfg);
pipeline::TaskStream make_stream(const RunConfig& cfg);

// Default output root: $UIRD_OUTPUT_ROOT, else "runs".
std::filesystem::path default_output_root();

}  // namespace uird::config

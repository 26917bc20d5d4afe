#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uird/config.hpp"
#include "uird/metrics.hpp"
#include "uird/pipeline.hpp"

namespace uird::commands {

// parse -> filter -> detect -> segment -> standardize -> split. Writes
// beats.csv, train.csv, test.csv and ingest_summary.json; returns the summary.
nlohmann::json ingest(const config::RunConfig& cfg, const std::filesystem::path& out_dir);

// A synthetic 212 record with annotations, plus a beat-level CSV drawn from
// data.counts. Returns the summary written to synth_summary.json.
nlohmann::json synth_data(const config::RunConfig& cfg, const std::filesystem::path& out_dir);

struct RunOutput {
  pipeline::Strategy strategy;
  std::filesystem::path dir;
  std::string content_hash;
};

// Runs the sequence once for all strategies (detection is shared) and writes
// <root>/<name>/<strategy>/ for each.
std::vector<RunOutput> run(const config::RunConfig& cfg, const std::vector<pipeline::Strategy>& strategies,
                           const std::filesystem::path& root, pipeline::RunResult* result = nullptr);

struct LoadedRun {
  nlohmann::json manifest;
  std::vector<metrics::TaskReport> reports;
};
LoadedRun load_run(const std::filesystem::path& dir);

// Task table then forgetting table over several run directories.
std::string report(const std::vector<std::filesystem::path>& run_dirs, metrics::TableFormat format);

}  // namespace uird::commands

#include "uird/commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "uird/error.hpp"
#include "uird/ingest.hpp"
#include "uird/io.hpp"
#include "uird/synth.hpp"

namespace uird::commands {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kSynthGain = 200.0;

json class_counts(const BeatSet& beats) {
  std::map<std::string, std::size_t> counts;
  for (const Beat& b : beats) ++counts[std::string(1, b.label)];
  return counts;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::string record_file(const fs::path& out, const std::string& name, const std::string& contents, json& files) {
  write_file(out / name, contents);
  files[name] = content_hash(contents);
  return name;
}

}  // namespace

json ingest(const config::RunConfig& cfg, const fs::path& out_dir) {
  const auto& in = cfg.ingest;
  if (in.records.empty()) fail(ErrorKind::Validation, "config: 'ingest.records' is empty");
  BeatSet all;
  json records = json::array();
  for (const auto& rec : in.records) {
    const auto signals = ingest::parse_wfdb212(bytes_of(read_file(rec.signal)), rec.layout);
    const ingest::RawSignal filtered = ingest::highpass_fir(signals.at(static_cast<std::size_t>(rec.channel)),
                                                            in.highpass_cutoff_hz, in.fir_order);
    const auto annotations = ingest::load_annotations(rec.annotations);
    std::vector<std::size_t> peaks;
    if (in.annotation_peaks) {
      for (const auto& a : annotations) peaks.push_back(a.sample_index);
      std::sort(peaks.begin(), peaks.end());
    } else {
      peaks = ingest::detect_r_peaks(filtered, in.detector);
    }
    auto seg = ingest::segment_beats(filtered, peaks, annotations, in.match_window_s);
    std::size_t outside = 0;
    for (Beat& b : seg.beats) {
      if (!in_alphabet(cfg.alphabet, b.label)) {
        ++outside;
        continue;
      }
      all.push_back(ingest::standardize(std::move(b)));
    }
    records.push_back({{"signal", rec.signal.filename().string()},
                       {"samples", filtered.samples.size()},
                       {"peaks", peaks.size()},
                       {"beats", seg.beats.size() - outside},
                       {"dropped_boundary", seg.dropped_boundary},
                       {"dropped_unlabeled", seg.dropped_unlabeled},
                       {"dropped_outside_alphabet", outside}});
  }
  const auto stream = pipeline::make_stream(all, cfg.pipeline.test_fraction, cfg.seed, cfg.order);
  BeatSet train, test;
  std::string order;
  for (const auto& c : stream.classes) {
    train.insert(train.end(), c.train.begin(), c.train.end());
    test.insert(test.end(), c.test.begin(), c.test.end());
    order += c.symbol;
  }

  json files = json::object();
  record_file(out_dir, "beats.csv", ingest::format_beatset_csv(all), files);
  record_file(out_dir, "train.csv", ingest::format_beatset_csv(train), files);
  record_file(out_dir, "test.csv", ingest::format_beatset_csv(test), files);
  json summary;
  summary["records"] = records;
  summary["beats_per_class"] = class_counts(all);
  summary["train_per_class"] = class_counts(train);
  summary["test_per_class"] = class_counts(test);
  summary["class_order"] = order;
  summary["peaks"] = in.annotation_peaks ? "annotations" : "detect";
  summary["files"] = files;
  write_file(out_dir / "ingest_summary.json", summary.dump(2) + "\n");
  return summary;
}

json synth_data(const config::RunConfig& cfg, const fs::path& out_dir) {
  const auto& d = cfg.data;
  if (d.format != "synthetic") fail(ErrorKind::Validation, "config: synth-data needs data.format = \"synthetic\"");
  const synth::Record rec = synth::make_record(d.counts, d.seed, 360.0, d.jitter);

  std::vector<int> raw;
  raw.reserve(rec.signal.samples.size());
  for (double v : rec.signal.samples) raw.push_back(std::clamp(static_cast<int>(std::lround(v * kSynthGain)), -2048, 2047));
  const auto packed = ingest::encode_wfdb212({raw});
  std::string ann;
  for (const auto& a : rec.annotations) ann += std::to_string(a.sample_index) + "," + a.symbol + "\n";

  BeatSet beats = synth::make_beats(d.counts, d.seed, d.jitter);
  for (Beat& b : beats) b = ingest::standardize(std::move(b));

  json files = json::object();
  record_file(out_dir, "synthetic.dat", std::string(packed.begin(), packed.end()), files);
  record_file(out_dir, "synthetic_annotations.csv", ann, files);
  record_file(out_dir, "beats.csv", ingest::format_beatset_csv(beats), files);
  json summary;
  summary["record"] = {{"signal", "synthetic.dat"},
                       {"annotations", "synthetic_annotations.csv"},
                       {"format", "wfdb212"},
                       {"channels", 1},
                       {"gain", kSynthGain},
                       {"fs", 360},
                       {"samples", raw.size()},
                       {"beats", rec.annotations.size()}};
  summary["beats_per_class"] = class_counts(beats);
  summary["files"] = files;
  write_file(out_dir / "synth_summary.json", summary.dump(2) + "\n");
  return summary;
}

std::vector<RunOutput> run(const config::RunConfig& cfg, const std::vector<pipeline::Strategy>& strategies,
                           const fs::path& root, pipeline::RunResult* result) {
  const auto stream = config::make_stream(cfg);
  auto res = pipeline::run_sequence(stream, cfg.pipeline, strategies);
  std::vector<RunOutput> out;
  for (pipeline::Strategy s : strategies) {
    const fs::path dir = root / cfg.name / pipeline::to_string(s);
    out.push_back({s, dir, pipeline::write_run_directory(dir, res, s, cfg.document, cfg.seed)});
  }
  if (result) *result = std::move(res);
  return out;
}

LoadedRun load_run(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::is_regular_file(manifest)) fail(ErrorKind::Validation, "not a run directory (no manifest.json): " + dir.string());
  LoadedRun r;
  try {
    r.manifest = json::parse(read_file(manifest));
    for (const auto& t : r.manifest.at("tasks")) {
      if (!t.at("files").contains("report.json")) continue;
      const fs::path p = dir / ("task_" + std::to_string(t.at("task").get<int>())) / "report.json";
      r.reports.push_back(metrics::report_from_json(json::parse(read_file(p))));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, "run " + dir.string() + ": " + e.what());
  }
  return r;
}

std::string report(const std::vector<fs::path>& run_dirs, metrics::TableFormat format) {
  if (run_dirs.empty()) fail(ErrorKind::Validation, "report: no run directories given");
  std::vector<metrics::TaskReport> all;
  std::string order;
  for (const auto& dir : run_dirs) {
    LoadedRun r = load_run(dir);
    const std::string o = r.manifest.at("class_order").get<std::string>();
    if (order.empty()) order = o;
    if (o != order)
      fail(ErrorKind::Validation, "report: class order '" + o + "' of " + dir.string() + " differs from '" + order + "'");
    all.insert(all.end(), r.reports.begin(), r.reports.end());
  }
  const std::string tasks = metrics::emit_task_table(all, format);
  const std::string forgetting = metrics::emit_forgetting_table(all, format);
  switch (format) {
    case metrics::TableFormat::Json: {
      json j{{"class_order", order}, {"tasks", json::parse(tasks)}, {"forgetting", json::parse(forgetting)}};
      return j.dump(2) + "\n";
    }
    case metrics::TableFormat::Csv: return tasks + "\n" + forgetting;
    case metrics::TableFormat::Markdown: return "## Tasks\n\n" + tasks + "\n## F-score per class\n\n" + forgetting;
  }
  return tasks;
}

}  // namespace uird::commands

#include "uird/pipeline.hpp"

#include <algorithm>

#include "uird/error.hpp"
#include "uird/ingest.hpp"
#include "uird/io.hpp"
#include "uird/nn/checkpoint.hpp"
#include "uird/rng.hpp"

namespace uird::pipeline {
namespace {

// Sub-seed purposes; fixed so that adding tasks never shifts earlier streams.
enum Purpose : std::uint64_t {
  kSplit = 11,
  kCalibration,
  kMadeganInit,
  kMadeganTrain,
  kSmote,
  kClassifierInit,
  kClassifierTrain,
  kHead,
  kFisher,
};

constexpr int kManifestSchema = 1;

void append(BeatSet& into, const BeatSet& from) { into.insert(into.end(), from.begin(), from.end()); }

std::string label(int task, char symbol) { return "task " + std::to_string(task) + " (" + symbol + "): "; }

std::map<char, BeatSet> group(const BeatSet& beats) {
  std::map<char, BeatSet> out;
  for (const Beat& b : beats) out[b.label].push_back(b);
  return out;
}

std::vector<char> resolve_order(const std::map<char, BeatSet>& classes, const std::string& order) {
  if (order.empty()) {
    std::map<char, std::size_t> counts;
    for (const auto& [c, b] : classes) counts[c] = b.size();
    return order_by_sample_size(counts);
  }
  std::vector<char> out;
  for (char c : order) {
    if (!classes.count(c)) fail(ErrorKind::Validation, std::string("class order names '") + c + "', which has no beats");
    if (std::find(out.begin(), out.end(), c) != out.end())
      fail(ErrorKind::Validation, std::string("class order repeats '") + c + "'");
    out.push_back(c);
  }
  return out;
}

std::string scores_csv(const std::vector<double>& scores, const std::vector<bool>& flags) {
  std::string out = "beat_index,score,novel\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    out += std::to_string(i) + "," + format_double(scores[i]) + "," + (flags[i] ? "1" : "0") + "\n";
  return out;
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Uird: return "uird";
    case Strategy::Ewc: return "ewc";
    case Strategy::Joint: return "joint";
    case Strategy::MadeganOnly: return "madegan_only";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::Uird, Strategy::Ewc, Strategy::Joint, Strategy::MadeganOnly}) {
    if (name == to_string(s)) return s;
  }
  fail(ErrorKind::Validation, "unknown strategy '" + name + "' (uird, ewc, joint, madegan_only)");
}

std::vector<char> order_by_sample_size(const std::map<char, std::size_t>& counts) {
  std::vector<std::pair<char, std::size_t>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<char> out;
  for (const auto& [c, n] : v) out.push_back(c);
  return out;
}

TaskStream make_stream(const BeatSet& beats, double test_fraction, std::uint64_t seed, const std::string& order) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail(ErrorKind::Validation, "test_fraction must lie in (0, 1)");
  auto [train, test] = ingest::split_train_test(beats, 1.0 - test_fraction, derive_seed(seed, 0, kSplit));
  return make_stream(train, test, order);
}

TaskStream make_stream(const BeatSet& train, const BeatSet& test, const std::string& order) {
  auto tr = group(train), te = group(test);
  TaskStream s;
  s.rule = order.empty() ? "sample_size" : "explicit";
  for (char c : resolve_order(tr, order)) s.classes.push_back({c, tr[c], te[c]});
  return s;
}

Pipeline::Pipeline(PipelineConfig config, std::vector<Strategy> strategies)
    : config_(std::move(config)), strategies_(std::move(strategies)) {
  if (strategies_.empty()) fail(ErrorKind::Validation, "pipeline: no strategies selected");
  if (!(config_.calibration_fraction > 0.0 && config_.calibration_fraction < 1.0))
    fail(ErrorKind::Validation, "calibration_fraction must lie in (0, 1)");
  for (Strategy s : strategies_) state_[s];
}

const classifier::BeatClassifier* Pipeline::classifier(Strategy s) const {
  auto it = state_.find(s);
  if (it == state_.end() || !it->second.clf) return nullptr;
  return &*it->second.clf;
}

BeatSet Pipeline::test_set() const {
  BeatSet out;
  for (const BeatSet& t : tests_) append(out, t);
  return out;
}

BeatSet Pipeline::real_union(bool full_train) const {
  BeatSet out;
  for (const BeatSet& s : full_train ? full_train_ : stores_) append(out, s);
  return out;
}

void Pipeline::snapshot(TaskRecord& rec) const {
  rec.madegan = madegan_;
  rec.generators = generators_;
}

TaskRecord Pipeline::init_phase(const ClassData& normal) {
  if (next_task_ != 0) fail(ErrorKind::Runtime, "pipeline: init_phase called twice");
  if (normal.train.empty()) fail(ErrorKind::Validation, std::string("pipeline: no training beats for class '") + normal.symbol + "'");
  const std::uint64_t seed = config_.seed;
  auto [fit, calib] = ingest::split_train_test(normal.train, 1.0 - config_.calibration_fraction, derive_seed(seed, 0, kCalibration));
  if (fit.empty() || calib.empty()) fail(ErrorKind::Validation, "pipeline: too few normal beats to hold out a calibration set");

  madegan_ = madegan::Model(config_.madegan_arch, config_.loss_weights, derive_seed(seed, 0, kMadeganInit));
  madegan_.train(fit, config_.madegan_train, derive_seed(seed, 0, kMadeganTrain));
  madegan_.calibrate_threshold(calib, config_.tau_percentile);
  generators_.add(smote::Generator::fit(normal.train, config_.smote_k));

  known_ = std::string(1, normal.symbol);
  stores_ = {normal.train};
  fit_ = {fit};
  calib_ = {calib};
  full_train_ = {normal.train};
  tests_ = {normal.test};
  next_task_ = 1;

  TaskRecord rec;
  rec.task = 0;
  rec.symbol = normal.symbol;
  rec.updated = true;
  for (const auto& n : madegan_.classify_novelty(calib)) {
    rec.scores.push_back(n.score);
    rec.flags.push_back(n.is_novel);
  }
  rec.novelty = {calib.size(), static_cast<std::size_t>(std::count(rec.flags.begin(), rec.flags.end(), true)),
                 madegan_.threshold(), true};
  rec.log.push_back(label(0, normal.symbol) + "madegan trained on " + std::to_string(fit.size()) + " beats, tau " +
                    format_double(madegan_.threshold()) + " at percentile " + format_double(config_.tau_percentile) +
                    " of " + std::to_string(calib.size()) + " held-out beats");
  rec.log.push_back(label(0, normal.symbol) + "generator fitted on " + std::to_string(normal.train.size()) + " beats");
  snapshot(rec);
  return rec;
}

Detection Pipeline::detect_novel_batch(const BeatSet& incoming) const {
  Detection d;
  const auto decisions = madegan_.classify_novelty(incoming);
  for (std::size_t i = 0; i < incoming.size(); ++i) {
    d.scores.push_back(decisions[i].score);
    d.flags.push_back(decisions[i].is_novel);
    (decisions[i].is_novel ? d.novel : d.existing).push_back(incoming[i]);
  }
  return d;
}

TaskRecord Pipeline::run_task(const ClassData& incoming) {
  if (next_task_ == 0) fail(ErrorKind::Runtime, "pipeline: run_task before init_phase");
  if (known_.find(incoming.symbol) != std::string::npos)
    fail(ErrorKind::Validation, std::string("pipeline: class '") + incoming.symbol + "' was already learned");
  const int task = next_task_++;
  const std::uint64_t seed = config_.seed;
  const std::string tag = label(task, incoming.symbol);

  TaskRecord rec;
  rec.task = task;
  rec.symbol = incoming.symbol;
  Detection det = detect_novel_batch(incoming.train);
  rec.scores = det.scores;
  rec.flags = det.flags;
  rec.novelty = {incoming.train.size(), det.novel.size(), madegan_.threshold(), false};
  rec.log.push_back(tag + "scored " + std::to_string(incoming.train.size()) + " beats, tau " +
                    format_double(madegan_.threshold()) + ", flagged " + std::to_string(det.novel.size()) + " novel");

  // Earlier sub-threshold detections of this class count towards X_i.
  if (auto it = pending_.find(incoming.symbol); it != pending_.end()) {
    rec.log.push_back(tag + "adding " + std::to_string(it->second.size()) + " buffered beats");
    BeatSet merged = std::move(it->second);
    append(merged, det.novel);
    det.novel = std::move(merged);
    pending_.erase(it);
  }

  if (det.novel.size() < config_.min_novel_count || det.novel.empty()) {
    rec.log.push_back(tag + "no novel class (" + std::to_string(det.novel.size()) + " flagged, need " +
                      std::to_string(std::max<std::size_t>(1, config_.min_novel_count)) + "); models unchanged");
    if (!det.novel.empty()) {
      rec.log.push_back(tag + "buffered " + std::to_string(det.novel.size()) + " beats");
      pending_[incoming.symbol] = std::move(det.novel);
    }
    snapshot(rec);
    for (const auto& [s, st] : state_) {
      StrategyResult r;
      r.classifier = st.clf;
      r.anchors = st.anchors;
      rec.results[s] = std::move(r);
    }
    return rec;
  }
  rec.updated = true;
  rec.novelty.updated = true;

  // X_i takes the new class label, false positives included.
  BeatSet x = std::move(det.novel);
  for (Beat& b : x) b.label = incoming.symbol;
  const std::size_t n_new = x.size();

  // Pseudo replay from the generators of every earlier class.
  std::vector<std::size_t> counts(generators_.size(), n_new);
  const BeatSet pseudo = smote::synthesize_bank(generators_, counts, derive_seed(seed, static_cast<std::uint64_t>(task), kSmote));

  known_ += incoming.symbol;
  stores_.push_back(x);
  full_train_.push_back(incoming.train);
  tests_.push_back(incoming.test);
  const BeatSet test = test_set();
  const auto t = static_cast<std::uint64_t>(task);

  auto fresh = [&] { return classifier::BeatClassifier(known_, config_.classifier_arch, derive_seed(seed, t, kClassifierInit)); };
  const std::uint64_t train_seed = derive_seed(seed, t, kClassifierTrain);

  BeatSet replay_set = pseudo;
  append(replay_set, x);
  std::optional<classifier::BeatClassifier> shared;
  bool first_classifier = true;
  for (const auto& [s, st] : state_) first_classifier = first_classifier && !st.clf;
  if (config_.shared_task1_stage && first_classifier) {
    shared = fresh();
    shared->train(replay_set, config_.classifier_train, train_seed);
    rec.log.push_back(tag + "shared first-stage classifier trained on " + std::to_string(pseudo.size()) + " pseudo + " +
                      std::to_string(n_new) + " real beats");
  }

  for (auto& [s, st] : state_) {
    std::size_t real = 0, synthetic = 0;
    BeatSet task_data;
    if (shared) {
      st.clf = *shared;
      real = n_new;
      synthetic = pseudo.size();
      task_data = real_union(false);
    } else if (s == Strategy::Uird) {
      st.clf = fresh();
      st.clf->train(replay_set, config_.classifier_train, train_seed);
      real = n_new;
      synthetic = pseudo.size();
    } else if (s == Strategy::Joint) {
      const BeatSet all = real_union(true);
      st.clf = fresh();
      st.clf->train(all, config_.classifier_train, train_seed);
      real = all.size();
    } else if (!st.clf) {
      // First classifier of a sequential strategy: every detected store.
      task_data = real_union(false);
      st.clf = fresh();
      st.clf->train(task_data, config_.classifier_train, train_seed);
      real = task_data.size();
    } else {
      task_data = x;
      st.clf->add_class(incoming.symbol, derive_seed(seed, t, kHead));
      classifier::TrainOptions opt = config_.classifier_train;
      opt.require_all_classes = false;
      classifier::Penalty penalty;
      if (s == Strategy::Ewc) penalty = baselines::make_ewc_penalty(st.anchors, config_.ewc_lambda);
      st.clf->train(task_data, opt, train_seed, penalty);
      real = task_data.size();
    }
    if (s == Strategy::Ewc) {
      st.anchors.push_back(baselines::compute_fisher(*st.clf, task_data, config_.fisher_samples, derive_seed(seed, t, kFisher)));
    }

    StrategyResult r;
    r.report = st.clf->evaluate(test, task, to_string(s));
    r.report->real_train = real;
    r.report->synthetic_train = synthetic;
    r.report->novelty = rec.novelty;
    r.predictions = classifier::format_predictions(*st.clf, test);
    r.classifier = st.clf;
    r.anchors = st.anchors;
    rec.log.push_back(tag + to_string(s) + " classifier over '" + known_ + "': " + std::to_string(real) + " real + " +
                      std::to_string(synthetic) + " pseudo beats, macro F " + format_double(r.report->macro.f));
    rec.results[s] = std::move(r);
  }

  // M_i warm-starts from M_{i-1} and revisits every detected store.
  auto [fit, calib] = ingest::split_train_test(x, 1.0 - config_.calibration_fraction, derive_seed(seed, t, kCalibration));
  fit_.push_back(fit);
  calib_.push_back(calib);
  BeatSet fit_all, calib_all;
  for (const auto& f : fit_) append(fit_all, f);
  for (const auto& c : calib_) append(calib_all, c);
  madegan::TrainOptions ft = config_.madegan_train;
  ft.epochs = config_.madegan_finetune_epochs;
  madegan_.train(fit_all, ft, derive_seed(seed, t, kMadeganTrain));
  madegan_.calibrate_threshold(calib_all, config_.tau_percentile);
  rec.log.push_back(tag + "madegan fine-tuned on " + std::to_string(fit_all.size()) + " beats, tau " +
                    format_double(madegan_.threshold()));

  generators_.add(smote::Generator::fit(x, config_.smote_k));
  rec.log.push_back(tag + "generator fitted on " + std::to_string(n_new) + " beats");
  ++tasks_completed_;
  snapshot(rec);
  return rec;
}

RunResult run_sequence(const TaskStream& stream, const PipelineConfig& config, const std::vector<Strategy>& strategies) {
  if (stream.classes.size() < 2) fail(ErrorKind::Validation, "need >= 2 classes, got " + std::to_string(stream.classes.size()));
  Pipeline p(config, strategies);
  RunResult run;
  for (const auto& c : stream.classes) run.class_order += c.symbol;
  run.tasks.push_back(p.init_phase(stream.classes[0]));
  for (std::size_t i = 1; i < stream.classes.size(); ++i) run.tasks.push_back(p.run_task(stream.classes[i]));
  return run;
}

std::vector<metrics::TaskReport> reports_for(const RunResult& run, Strategy s) {
  std::vector<metrics::TaskReport> out;
  for (const auto& t : run.tasks) {
    auto it = t.results.find(s);
    if (t.updated && it != t.results.end() && it->second.report) out.push_back(*it->second.report);
  }
  return out;
}

std::string write_run_directory(const std::filesystem::path& dir, const RunResult& run, Strategy s,
                                const nlohmann::json& config_json, std::uint64_t seed) {
  namespace fs = std::filesystem;
  if (fs::exists(dir) && !fs::is_empty(dir)) fail(ErrorKind::Io, "run directory " + dir.string() + " is not empty");

  nlohmann::json tasks = nlohmann::json::array();
  std::vector<std::pair<std::string, std::string>> written;  // (path, hash)
  for (const TaskRecord& t : run.tasks) {
    const std::string sub = "task_" + std::to_string(t.task);
    nlohmann::json files = nlohmann::json::object();
    auto put = [&](const std::string& name, const std::string& contents) {
      const std::string rel = sub + "/" + name;
      write_file(dir / rel, contents);
      const std::string h = content_hash(contents);
      files[name] = h;
      written.emplace_back(rel, h);
    };
    put("madegan.ckpt", nn::encode_checkpoint(t.madegan.to_checkpoint()));
    for (std::size_t g = 0; g < t.generators.size(); ++g) {
      put("generators/" + std::to_string(g) + "_" + t.generators[g].class_symbol() + ".ckpt",
          nn::encode_checkpoint(t.generators[g].to_checkpoint()));
    }
    put("scores.csv", scores_csv(t.scores, t.flags));
    std::string log;
    for (const auto& line : t.log) log += line + "\n";
    put("decisions.log", log);

    auto it = t.results.find(s);
    if (it != t.results.end()) {
      const StrategyResult& r = it->second;
      if (r.classifier) put("classifier.ckpt", nn::encode_checkpoint(r.classifier->to_checkpoint()));
      if (!r.anchors.empty()) put("ewc_anchors.ckpt", nn::encode_checkpoint(baselines::fisher_checkpoint(r.anchors)));
      if (t.updated && r.report) {
        put("report.json", metrics::to_json(*r.report).dump(2) + "\n");
        put("predictions.csv", r.predictions);
      }
    }
    tasks.push_back({{"task", t.task}, {"class", std::string(1, t.symbol)}, {"updated", t.updated}, {"files", files}});
  }

  std::sort(written.begin(), written.end());
  std::string listing;
  for (const auto& [rel, h] : written) listing += h + " " + rel + "\n";

  nlohmann::json m;
  m["schema_version"] = kManifestSchema;
  m["strategy"] = to_string(s);
  m["seed"] = seed;
  m["class_order"] = run.class_order;
  m["config"] = config_json;
  m["config_hash"] = content_hash(config_json.dump());
  m["tasks"] = tasks;
  m["content_hash"] = content_hash(listing);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
  return m["content_hash"].get<std::string>();
}

}  // namespace uird::pipeline

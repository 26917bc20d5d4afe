#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uird/baselines.hpp"
#include "uird/beat.hpp"
#include "uird/classifier.hpp"
#include "uird/madegan.hpp"
#include "uird/metrics.hpp"
#include "uird/smote.hpp"

namespace uird::pipeline {

enum class Strategy { Uird, Ewc, Joint, MadeganOnly };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

struct PipelineConfig {
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  double calibration_fraction = 0.2;

  madegan::Architecture madegan_arch = madegan::Architecture::desk();
  madegan::LossWeights loss_weights{};
  madegan::TrainOptions madegan_train{};
  std::size_t madegan_finetune_epochs = 5;
  double tau_percentile = 95.0;

  std::size_t smote_k = 5;

  classifier::Architecture classifier_arch{};
  classifier::TrainOptions classifier_train{};

  double ewc_lambda = 100.0;
  std::size_t fisher_samples = 1000;

  std::size_t min_novel_count = 20;
  // Every strategy reuses one task-1 classifier, trained as the replay
  // strategy trains it.
  bool shared_task1_stage = true;
};

struct ClassData {
  char symbol = '?';
  BeatSet train, test;
};

// Classes in arrival order.
struct TaskStream {
  std::vector<ClassData> classes;
  std::string rule;
};

// Descending count, ties by symbol.
std::vector<char> order_by_sample_size(const std::map<char, std::size_t>& counts);
// Groups beats by label and splits each class with a seed derived from the
// master seed. An empty `order` means order_by_sample_size; otherwise it
// lists every class to keep, in arrival order.
TaskStream make_stream(const BeatSet& beats, double test_fraction, std::uint64_t seed, const std::string& order = "");
// Pre-split data; sample-size order uses the training counts.
TaskStream make_stream(const BeatSet& train, const BeatSet& test, const std::string& order = "");

struct Detection {
  BeatSet novel, existing;
  std::vector<double> scores;
  std::vector<bool> flags;
};

// Per strategy, per task.
struct StrategyResult {
  std::optional<metrics::TaskReport> report;
  std::optional<classifier::BeatClassifier> classifier;
  std::vector<baselines::FisherInfo> anchors;
  std::string predictions;  // CSV on the test set
};

struct TaskRecord {
  int task = 0;
  char symbol = '?';
  bool updated = false;
  metrics::NoveltyStats novelty;
  std::vector<double> scores;  // incoming batch (calibration set at task 0)
  std::vector<bool> flags;
  std::vector<std::string> log;
  // Snapshot after the task.
  madegan::Model madegan;
  smote::GeneratorBank generators;
  std::map<Strategy, StrategyResult> results;
};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::vector<Strategy> strategies);

  const PipelineConfig& config() const { return config_; }
  const std::vector<Strategy>& strategies() const { return strategies_; }
  const std::string& known_classes() const { return known_; }
  const madegan::Model& madegan() const { return madegan_; }
  const smote::GeneratorBank& generators() const { return generators_; }
  std::size_t tasks_completed() const { return tasks_completed_; }
  const std::vector<BeatSet>& stores() const { return stores_; }
  // Sub-threshold detections per class, merged into that class's next batch.
  const std::map<char, BeatSet>& pending() const { return pending_; }
  const classifier::BeatClassifier* classifier(Strategy s) const;

  // Trains M_0 and G_0 on normal beats and calibrates tau.
  TaskRecord init_phase(const ClassData& normal);
  Detection detect_novel_batch(const BeatSet& incoming) const;
  // Detects, then updates every strategy when enough beats are novel.
  TaskRecord run_task(const ClassData& incoming);

 private:
  struct StrategyState {
    std::optional<classifier::BeatClassifier> clf;
    std::vector<baselines::FisherInfo> anchors;
  };

  BeatSet test_set() const;
  BeatSet real_union(bool full_train) const;
  void snapshot(TaskRecord& rec) const;

  PipelineConfig config_;
  std::vector<Strategy> strategies_;
  std::string known_;
  madegan::Model madegan_;
  smote::GeneratorBank generators_;
  // Detected real stores X_i with their fit/calibration halves.
  std::vector<BeatSet> stores_, fit_, calib_;
  std::vector<BeatSet> full_train_, tests_;
  std::map<Strategy, StrategyState> state_;
  std::map<char, BeatSet> pending_;
  std::size_t tasks_completed_ = 0;
  int next_task_ = 0;
};

struct RunResult {
  std::string class_order;
  std::vector<TaskRecord> tasks;
};

RunResult run_sequence(const TaskStream& stream, const PipelineConfig& config, const std::vector<Strategy>& strategies);

// Reports of one strategy across tasks.
std::vector<metrics::TaskReport> reports_for(const RunResult& run, Strategy s);

// Writes run/<task_i>/... for one strategy plus manifest.json. `config_json`
// is copied into the manifest verbatim. The content hash covers the lines
// "<file hash> <relative path>" sorted by path; it is returned.
std::string write_run_directory(const std::filesystem::path& dir, const RunResult& run, Strategy s,
                                const nlohmann::json& config_json, std::uint64_t seed);

}  // namespace uird::pipeline

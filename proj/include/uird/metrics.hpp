#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace uird::metrics {

// Rows are true classes, columns predicted.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return n_; }
  std::size_t& at(std::size_t truth, std::size_t predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const;
  void add(std::size_t truth, std::size_t predicted) { ++at(truth, predicted); }
  std::size_t total() const;
  std::size_t row_sum(std::size_t truth) const;
  std::size_t col_sum(std::size_t predicted) const;
  const std::vector<std::size_t>& counts() const { return counts_; }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion_from(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool operator==(const Scores&) const = default;
};

// Zero denominators give 0 rather than NaN.
Scores precision_recall_f(const ConfusionMatrix& cm, std::size_t cls);

// Novelty gate outcome on one incoming batch.
struct NoveltyStats {
  std::size_t batch_size = 0;
  std::size_t flagged = 0;
  double threshold = 0.0;
  bool updated = false;
  bool operator==(const NoveltyStats&) const = default;
};

struct TaskReport {
  int task = 0;
  std::string strategy;
  std::string classes;  // one symbol per class index
  std::vector<Scores> per_class;
  Scores macro;
  ConfusionMatrix confusion;
  std::size_t real_train = 0;
  std::size_t synthetic_train = 0;
  std::optional<NoveltyStats> novelty;

  bool operator==(const TaskReport&) const = default;
};

inline constexpr int kReportSchemaVersion = 1;

// Fills per-class and macro scores from the confusion matrix.
TaskReport make_report(int task, const std::string& strategy, const std::string& classes, ConfusionMatrix cm);

// Unweighted mean over classes with at least one true sample.
Scores macro_average(const TaskReport& report);

nlohmann::json to_json(const TaskReport& report);
TaskReport report_from_json(const nlohmann::json& j);

enum class TableFormat { Csv, Json, Markdown };
TableFormat parse_table_format(const std::string& name);

// One row per report: method, task, macro precision / recall / F.
std::string emit_task_table(const std::vector<TaskReport>& reports, TableFormat format);
// Per-class F across tasks, grouped by method; a dash before a class appears.
std::string emit_forgetting_table(const std::vector<TaskReport>& reports, TableFormat format);

}  // namespace uird::metrics

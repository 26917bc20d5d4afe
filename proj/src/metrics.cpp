#include "uird/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "uird/error.hpp"
#include "uird/io.hpp"

namespace uird::metrics {
namespace {

const char* kDash = "—";

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

nlohmann::json scores_json(const Scores& s) { return {{"precision", s.precision}, {"recall", s.recall}, {"f", s.f}}; }

Scores scores_from(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f").get<double>()};
}

// Pads every column to its widest cell.
std::string markdown(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  auto cells = [](const std::string& s) {
    // Display width: count code points, not bytes.
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = std::max<std::size_t>(3, cells(header[c]));
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], cells(r[c]));
  }
  auto line = [&](const std::vector<std::string>& r) {
    std::string out = "|";
    for (std::size_t c = 0; c < r.size(); ++c) out += " " + r[c] + std::string(width[c] - cells(r[c]), ' ') + " |";
    return out + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (std::size_t w : width) out += std::string(w + 2, '-') + "|";
  out += "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  auto line = [](const std::vector<std::string>& r) {
    std::string out;
    for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + r[c];
    return out + "\n";
  };
  std::string out = line(header);
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace

std::size_t& ConfusionMatrix::at(std::size_t truth, std::size_t predicted) {
  if (truth >= n_ || predicted >= n_) fail(ErrorKind::Validation, "confusion index out of range");
  return counts_[truth * n_ + predicted];
}

std::size_t ConfusionMatrix::at(std::size_t truth, std::size_t predicted) const {
  if (truth >= n_ || predicted >= n_) fail(ErrorKind::Validation, "confusion index out of range");
  return counts_[truth * n_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (std::size_t c : counts_) s += c;
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, p);
  return s;
}

std::size_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::size_t s = 0;
  for (std::size_t t = 0; t < n_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix confusion_from(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) fail(ErrorKind::Validation, "confusion: label vectors differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0) fail(ErrorKind::Validation, "confusion: negative class index");
    cm.add(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

Scores precision_recall_f(const ConfusionMatrix& cm, std::size_t cls) {
  const double tp = static_cast<double>(cm.at(cls, cls));
  const double pred = static_cast<double>(cm.col_sum(cls));
  const double real = static_cast<double>(cm.row_sum(cls));
  Scores s;
  s.precision = pred > 0 ? tp / pred : 0.0;
  s.recall = real > 0 ? tp / real : 0.0;
  s.f = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

Scores macro_average(const TaskReport& report) {
  Scores sum;
  std::size_t n = 0;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    if (report.confusion.row_sum(c) == 0) continue;
    sum.precision += report.per_class[c].precision;
    sum.recall += report.per_class[c].recall;
    sum.f += report.per_class[c].f;
    ++n;
  }
  if (n == 0) return {};
  return {sum.precision / static_cast<double>(n), sum.recall / static_cast<double>(n), sum.f / static_cast<double>(n)};
}

TaskReport make_report(int task, const std::string& strategy, const std::string& classes, ConfusionMatrix cm) {
  if (cm.classes() != classes.size()) fail(ErrorKind::Validation, "report: confusion size does not match class list");
  TaskReport r;
  r.task = task;
  r.strategy = strategy;
  r.classes = classes;
  r.confusion = std::move(cm);
  for (std::size_t c = 0; c < classes.size(); ++c) r.per_class.push_back(precision_recall_f(r.confusion, c));
  r.macro = macro_average(r);
  return r;
}

nlohmann::json to_json(const TaskReport& r) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["zero_denominator"] = "0";
  j["task"] = r.task;
  j["strategy"] = r.strategy;
  j["classes"] = r.classes;
  j["macro"] = scores_json(r.macro);
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t c = 0; c < r.classes.size(); ++c) per[std::string(1, r.classes[c])] = scores_json(r.per_class[c]);
  j["per_class"] = per;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  j["train_counts"] = {{"real", r.real_train}, {"synthetic", r.synthetic_train}};
  if (r.novelty) {
    j["novelty"] = {{"batch_size", r.novelty->batch_size},
                    {"flagged", r.novelty->flagged},
                    {"threshold", r.novelty->threshold},
                    {"updated", r.novelty->updated}};
  } else {
    j["novelty"] = nullptr;
  }
  return j;
}

TaskReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) fail(ErrorKind::Parse, "report: unsupported schema version");
    TaskReport r;
    r.task = j.at("task").get<int>();
    r.strategy = j.at("strategy").get<std::string>();
    r.classes = j.at("classes").get<std::string>();
    r.macro = scores_from(j.at("macro"));
    for (char c : r.classes) r.per_class.push_back(scores_from(j.at("per_class").at(std::string(1, c))));
    const auto& rows = j.at("confusion");
    r.confusion = ConfusionMatrix(r.classes.size());
    if (rows.size() != r.classes.size()) fail(ErrorKind::Parse, "report: confusion size mismatch");
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != r.classes.size()) fail(ErrorKind::Parse, "report: confusion size mismatch");
      for (std::size_t p = 0; p < rows[t].size(); ++p) r.confusion.at(t, p) = rows[t][p].get<std::size_t>();
    }
    r.real_train = j.at("train_counts").at("real").get<std::size_t>();
    r.synthetic_train = j.at("train_counts").at("synthetic").get<std::size_t>();
    if (!j.at("novelty").is_null()) {
      const auto& n = j.at("novelty");
      r.novelty = NoveltyStats{n.at("batch_size").get<std::size_t>(), n.at("flagged").get<std::size_t>(),
                               n.at("threshold").get<double>(), n.at("updated").get<bool>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("report: ") + e.what());
  }
}

TableFormat parse_table_format(const std::string& name) {
  if (name == "csv") return TableFormat::Csv;
  if (name == "json") return TableFormat::Json;
  if (name == "markdown" || name == "md") return TableFormat::Markdown;
  fail(ErrorKind::Validation, "unknown table format '" + name + "' (csv, json, markdown)");
}

std::string emit_task_table(const std::vector<TaskReport>& reports, TableFormat format) {
  if (format == TableFormat::Json) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : reports) {
      rows.push_back({{"method", r.strategy}, {"task", r.task}, {"precision", r.macro.precision},
                      {"recall", r.macro.recall}, {"f", r.macro.f}});
    }
    return rows.dump(2) + "\n";
  }
  const std::vector<std::string> header{"Method", "Task", "Precision", "Recall", "F-score"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    rows.push_back({r.strategy, std::to_string(r.task), fixed2(r.macro.precision), fixed2(r.macro.recall),
                    fixed2(r.macro.f)});
  }
  return format == TableFormat::Csv ? csv(header, rows) : markdown(header, rows);
}

std::string emit_forgetting_table(const std::vector<TaskReport>& reports, TableFormat format) {
  // Group by method, keeping first-seen order; tasks are the union.
  std::vector<std::string> methods;
  std::map<std::string, std::vector<const TaskReport*>> by_method;
  std::vector<int> tasks;
  for (const auto& r : reports) {
    if (!by_method.count(r.strategy)) methods.push_back(r.strategy);
    by_method[r.strategy].push_back(&r);
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
  }
  std::sort(tasks.begin(), tasks.end());

  struct Row {
    std::string method;
    char cls;
    std::vector<std::optional<double>> f;
  };
  std::vector<Row> table;
  for (const auto& m : methods) {
    std::string classes;
    for (const TaskReport* r : by_method[m]) {
      for (char c : r->classes) {
        if (classes.find(c) == std::string::npos) classes += c;
      }
    }
    for (char c : classes) {
      Row row{m, c, std::vector<std::optional<double>>(tasks.size())};
      for (const TaskReport* r : by_method[m]) {
        const std::size_t col = static_cast<std::size_t>(std::find(tasks.begin(), tasks.end(), r->task) - tasks.begin());
        const std::size_t idx = r->classes.find(c);
        if (idx != std::string::npos) row.f[col] = r->per_class[idx].f;
      }
      table.push_back(std::move(row));
    }
  }

  if (format == TableFormat::Json) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table) {
      nlohmann::json cells = nlohmann::json::object();
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        cells[std::to_string(tasks[t])] = row.f[t] ? nlohmann::json(*row.f[t]) : nlohmann::json(nullptr);
      }
      rows.push_back({{"method", row.method}, {"class", std::string(1, row.cls)}, {"f_by_task", cells}});
    }
    return rows.dump(2) + "\n";
  }
  std::vector<std::string> header{"Method", "Class"};
  for (int t : tasks) header.push_back("Task " + std::to_string(t));
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : table) {
    std::vector<std::string> cells{row.method, std::string(1, row.cls)};
    for (const auto& f : row.f) cells.push_back(f ? fixed2(*f) : (format == TableFormat::Csv ? "" : kDash));
    rows.push_back(std::move(cells));
  }
  return format == TableFormat::Csv ? csv(header, rows) : markdown(header, rows);
}

}  // namespace uird::metrics

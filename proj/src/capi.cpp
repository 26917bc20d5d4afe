#include "uird/uird.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "uird/commands.hpp"
#include "uird/config.hpp"
#include "uird/error.hpp"
#include "uird/pipeline.hpp"

struct uird_config {
  uird::config::RunConfig cfg;
  std::string output_dir;
};

struct uird_run {
  uird::pipeline::RunResult result;
  uird::config::RunConfig cfg;
};

namespace {

thread_local std::string last_error;

uird_status status_of(uird::ErrorKind kind) {
  switch (kind) {
    case uird::ErrorKind::Validation: return UIRD_ERR_VALIDATION;
    case uird::ErrorKind::Parse: return UIRD_ERR_PARSE;
    case uird::ErrorKind::Io: return UIRD_ERR_IO;
    case uird::ErrorKind::Shape: return UIRD_ERR_SHAPE;
    case uird::ErrorKind::Divergence: return UIRD_ERR_DIVERGENCE;
    case uird::ErrorKind::Runtime: return UIRD_ERR_RUNTIME;
  }
  return UIRD_ERR_RUNTIME;
}

template <typename F>
uird_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return UIRD_OK;
  } catch (const uird::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return UIRD_ERR_RUNTIME;
}

uird_status missing(const char* what) {
  last_error = std::string("null ") + what;
  return UIRD_ERR_ARGUMENT;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

std::vector<std::string> list(const char* const* items, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) {
    if (!items[i]) uird::fail(uird::ErrorKind::Validation, "null entry in list");
    out.emplace_back(items[i]);
  }
  return out;
}

uird_config* wrap(uird::config::RunConfig cfg) {
  auto* c = new uird_config{std::move(cfg), {}};
  c->output_dir = c->cfg.output_dir.string();
  return c;
}

}  // namespace

extern "C" {

const char* uird_version(void) { return "0.1.0"; }

const char* uird_status_name(uird_status status) {
  switch (status) {
    case UIRD_OK: return "ok";
    case UIRD_ERR_VALIDATION: return "validation";
    case UIRD_ERR_PARSE: return "parse";
    case UIRD_ERR_IO: return "io";
    case UIRD_ERR_SHAPE: return "shape";
    case UIRD_ERR_DIVERGENCE: return "divergence";
    case UIRD_ERR_RUNTIME: return "runtime";
    case UIRD_ERR_ARGUMENT: return "argument";
  }
  return "unknown";
}

const char* uird_last_error(void) { return last_error.c_str(); }

void uird_string_free(char* s) { std::free(s); }

uird_status uird_config_load(const char* path, const char* const* overrides, size_t n_overrides, uird_config** out) {
  if (!path) return missing("path");
  if (!out) return missing("output pointer");
  if (n_overrides && !overrides) return missing("override list");
  return guard([&] { *out = wrap(uird::config::load(path, list(overrides, n_overrides))); });
}

uird_status uird_config_load_text(const char* json_text, const char* base_dir, const char* const* overrides,
                                  size_t n_overrides, uird_config** out) {
  if (!json_text) return missing("config text");
  if (!out) return missing("output pointer");
  if (n_overrides && !overrides) return missing("override list");
  return guard([&] {
    *out = wrap(uird::config::load_text(json_text, base_dir ? base_dir : ".", list(overrides, n_overrides)));
  });
}

void uird_config_free(uird_config* cfg) { delete cfg; }

const char* uird_config_name(const uird_config* cfg) { return cfg ? cfg->cfg.name.c_str() : ""; }

uint64_t uird_config_seed(const uird_config* cfg) { return cfg ? cfg->cfg.seed : 0; }

const char* uird_config_output_dir(const uird_config* cfg) { return cfg ? cfg->output_dir.c_str() : ""; }

uird_status uird_config_json(const uird_config* cfg, char** out) {
  if (!cfg) return missing("config");
  if (!out) return missing("output pointer");
  return guard([&] { *out = dup(cfg->cfg.document.dump(2)); });
}

uird_status uird_run_sequence(const uird_config* cfg, const char* const* strategies, size_t n_strategies, uird_run** out) {
  if (!cfg) return missing("config");
  if (!out) return missing("output pointer");
  if (n_strategies && !strategies) return missing("strategy list");
  return guard([&] {
    std::vector<uird::pipeline::Strategy> s;
    for (const auto& name : list(strategies, n_strategies)) s.push_back(uird::pipeline::parse_strategy(name));
    auto stream = uird::config::make_stream(cfg->cfg);
    auto result = uird::pipeline::run_sequence(stream, cfg->cfg.pipeline, s);
    *out = new uird_run{std::move(result), cfg->cfg};
  });
}

void uird_run_free(uird_run* run) { delete run; }

size_t uird_run_task_count(const uird_run* run) { return run ? run->result.tasks.size() : 0; }

const char* uird_run_class_order(const uird_run* run) { return run ? run->result.class_order.c_str() : ""; }

uird_status uird_run_write(const uird_run* run, const char* strategy, const char* dir, char** content_hash) {
  if (!run) return missing("run");
  if (!strategy) return missing("strategy");
  if (!dir) return missing("directory");
  return guard([&] {
    const auto s = uird::pipeline::parse_strategy(strategy);
    if (run->result.tasks.empty() || !run->result.tasks.back().results.count(s))
      uird::fail(uird::ErrorKind::Validation, std::string("strategy '") + strategy + "' was not part of this run");
    const std::string h = uird::pipeline::write_run_directory(dir, run->result, s, run->cfg.document, run->cfg.seed);
    if (content_hash) *content_hash = dup(h);
  });
}

uird_status uird_run_log(const uird_run* run, char** out) {
  if (!run) return missing("run");
  if (!out) return missing("output pointer");
  return guard([&] {
    std::string text;
    for (const auto& t : run->result.tasks)
      for (const auto& line : t.log) text += line + "\n";
    *out = dup(text);
  });
}

uird_status uird_run_reports_json(const uird_run* run, const char* strategy, char** out) {
  if (!run) return missing("run");
  if (!strategy) return missing("strategy");
  if (!out) return missing("output pointer");
  return guard([&] {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : uird::pipeline::reports_for(run->result, uird::pipeline::parse_strategy(strategy)))
      arr.push_back(uird::metrics::to_json(r));
    *out = dup(arr.dump(2));
  });
}

uird_status uird_ingest(const uird_config* cfg, const char* out_dir, char** summary) {
  if (!cfg) return missing("config");
  if (!out_dir) return missing("output directory");
  return guard([&] {
    const auto s = uird::commands::ingest(cfg->cfg, out_dir);
    if (summary) *summary = dup(s.dump(2));
  });
}

uird_status uird_synth_data(const uird_config* cfg, const char* out_dir, char** summary) {
  if (!cfg) return missing("config");
  if (!out_dir) return missing("output directory");
  return guard([&] {
    const auto s = uird::commands::synth_data(cfg->cfg, out_dir);
    if (summary) *summary = dup(s.dump(2));
  });
}

uird_status uird_report(const char* const* run_dirs, size_t n_dirs, const char* format, char** out) {
  if (n_dirs && !run_dirs) return missing("run directory list");
  if (!out) return missing("output pointer");
  return guard([&] {
    std::vector<std::filesystem::path> dirs;
    for (const auto& d : list(run_dirs, n_dirs)) dirs.emplace_back(d);
    *out = dup(uird::commands::report(dirs, uird::metrics::parse_table_format(format ? format : "markdown")));
  });
}

}  // extern "C"

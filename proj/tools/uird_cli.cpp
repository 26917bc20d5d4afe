#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uird/uird.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Failure {
  uird_status status;
};

int exit_code(uird_status s) {
  switch (s) {
    case UIRD_OK: return kExitOk;
    case UIRD_ERR_VALIDATION:
    case UIRD_ERR_PARSE:
    case UIRD_ERR_ARGUMENT: return kExitValidation;
    default: return kExitRuntime;
  }
}

void check(uird_status s) {
  if (s != UIRD_OK) throw Failure{s};
}

struct Owned {
  char* p = nullptr;
  ~Owned() { uird_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

using ConfigPtr = std::unique_ptr<uird_config, decltype(&uird_config_free)>;
using RunPtr = std::unique_ptr<uird_run, decltype(&uird_run_free)>;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", c.overrides, "Override a config key, e.g. madegan.epochs=5")->take_all();
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
}

ConfigPtr load(const Common& c) {
  std::vector<std::string> sets = c.overrides;
  if (!c.seed.empty()) sets.push_back("seed=" + c.seed);
  std::vector<const char*> ptrs;
  for (const auto& s : sets) ptrs.push_back(s.c_str());
  uird_config* cfg = nullptr;
  check(uird_config_load(c.config.c_str(), ptrs.data(), ptrs.size(), &cfg));
  return ConfigPtr(cfg, uird_config_free);
}

fs::path run_root(const uird_config* cfg, const Common& c) {
  return fs::path(c.out.empty() ? uird_config_output_dir(cfg) : c.out) / uird_config_name(cfg);
}

int run_strategies(const Common& c, const std::vector<std::string>& strategies) {
  ConfigPtr cfg = load(c);
  std::vector<const char*> names;
  for (const auto& s : strategies) names.push_back(s.c_str());
  uird_run* raw = nullptr;
  check(uird_run_sequence(cfg.get(), names.data(), names.size(), &raw));
  RunPtr run(raw, uird_run_free);

  Owned log;
  check(uird_run_log(run.get(), &log.p));
  std::cerr << log.str();
  const fs::path root = run_root(cfg.get(), c);
  for (const auto& s : strategies) {
    const fs::path dir = root / s;
    Owned hash;
    check(uird_run_write(run.get(), s.c_str(), dir.string().c_str(), &hash.p));
    std::cout << s << "\t" << dir.string() << "\t" << hash.str() << "\n";
  }
  return kExitOk;
}

int write_summary(const Common& c, const char* subdir,
                  uird_status (*fn)(const uird_config*, const char*, char**)) {
  ConfigPtr cfg = load(c);
  const fs::path dir = c.out.empty() ? run_root(cfg.get(), c) / subdir : fs::path(c.out);
  Owned summary;
  check(fn(cfg.get(), dir.string().c_str(), &summary.p));
  std::cout << summary.str() << "\n" << "wrote " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Novelty detection and replay for class-incremental ECG beat classification"};
  app.set_version_flag("--version", std::string(uird_version()));
  app.require_subcommand(1);

  Common ingest_opts, synth_opts, uird_opts, base_opts;

  auto* ingest = app.add_subcommand("ingest", "Turn WFDB-212 records into standardized beat CSVs");
  add_common(ingest, ingest_opts);
  ingest->add_option("-o,--out", ingest_opts.out, "Output directory (default <output root>/<name>/ingest)");

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic 212 record and beat CSV");
  add_common(synth, synth_opts);
  synth->add_option("-o,--out", synth_opts.out, "Output directory (default <output root>/<name>/synth)");

  auto* run_uird = app.add_subcommand("run-uird", "Run the incremental loop with replay");
  add_common(run_uird, uird_opts);
  run_uird->add_option("-o,--out", uird_opts.out, "Output root (default: config, then $UIRD_OUTPUT_ROOT)");

  std::vector<std::string> baselines;
  auto* run_base = app.add_subcommand("run-baseline", "Run ewc, joint or madegan_only on the same stream");
  add_common(run_base, base_opts);
  run_base->add_option("-o,--out", base_opts.out, "Output root (default: config, then $UIRD_OUTPUT_ROOT)");
  run_base->add_option("--strategy", baselines, "Baseline(s); repeat to share one detection pass")
      ->required()
      ->check(CLI::IsMember({"ewc", "joint", "madegan_only"}));

  std::vector<std::string> run_dirs;
  std::string format = "markdown", report_out;
  auto* report = app.add_subcommand("report", "Merge run directories into comparison tables");
  report->add_option("runs", run_dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  report->add_option("-f,--format", format, "markdown, csv or json")
      ->check(CLI::IsMember({"markdown", "csv", "json"}));
  report->add_option("-o,--out", report_out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*ingest) return write_summary(ingest_opts, "ingest", uird_ingest);
    if (*synth) return write_summary(synth_opts, "synth", uird_synth_data);
    if (*run_uird) return run_strategies(uird_opts, {"uird"});
    if (*run_base) return run_strategies(base_opts, baselines);
    if (*report) {
      std::vector<const char*> ptrs;
      for (const auto& d : run_dirs) ptrs.push_back(d.c_str());
      Owned text;
      check(uird_report(ptrs.data(), ptrs.size(), format.c_str(), &text.p));
      if (report_out.empty()) {
        std::cout << text.str();
      } else {
        std::ofstream f(report_out, std::ios::binary);
        f << text.str();
        if (!f) {
          std::cerr << "error: cannot write " << report_out << "\n";
          return kExitRuntime;
        }
      }
      return kExitOk;
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << uird_status_name(f.status) << "): " << uird_last_error() << "\n";
    return exit_code(f.status);
  }
  return kExitOk;
}

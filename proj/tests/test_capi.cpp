// Exercises libuird through its C header only, plus the CLI built on it.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uird/uird.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kConfig = R"({"name": "capi", "seed": 3,
  "data": {"format": "synthetic", "counts": {"N": 40, "L": 30, "V": 25}}})";

const std::vector<const char*> kFast{
    "madegan.channels=[4,4]", "madegan.latent_dim=8", "madegan.memory_slots=10", "madegan.epochs=5",
    "madegan.lr=0.003", "madegan.finetune_epochs=1", "madegan.tau_percentile=50", "classifier.conv1_channels=2",
    "classifier.conv2_channels=2", "classifier.hidden1=8", "classifier.hidden2=4", "classifier.epochs=1",
    "ewc.fisher_samples=10", "pipeline.min_novel_count=1"};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("uird_capi_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  uird_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

uird_config* fast_config(std::vector<const char*> extra = {}) {
  std::vector<const char*> o = kFast;
  o.insert(o.end(), extra.begin(), extra.end());
  uird_config* cfg = nullptr;
  REQUIRE(uird_config_load_text(kConfig, ".", o.data(), o.size(), &cfg) == UIRD_OK);
  return cfg;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(UIRD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("capi: version and status names") {
  CHECK(std::string(uird_version()) == "0.1.0");
  CHECK(std::string(uird_status_name(UIRD_OK)) == "ok");
  CHECK(std::string(uird_status_name(UIRD_ERR_DIVERGENCE)) == "divergence");
  CHECK(std::string(uird_status_name(static_cast<uird_status>(99))) == "unknown");
}

TEST_CASE("capi: null arguments") {
  uird_config* cfg = nullptr;
  CHECK(uird_config_load(nullptr, nullptr, 0, &cfg) == UIRD_ERR_ARGUMENT);
  CHECK(std::string(uird_last_error()).find("null") != std::string::npos);
  CHECK(uird_config_load_text(kConfig, nullptr, nullptr, 0, nullptr) == UIRD_ERR_ARGUMENT);
  CHECK(uird_config_load_text(kConfig, nullptr, nullptr, 2, &cfg) == UIRD_ERR_ARGUMENT);
  CHECK(uird_run_sequence(nullptr, nullptr, 0, nullptr) == UIRD_ERR_ARGUMENT);
  CHECK(uird_report(nullptr, 1, "markdown", nullptr) == UIRD_ERR_ARGUMENT);
  CHECK(uird_config_seed(nullptr) == 0);
  CHECK(uird_run_task_count(nullptr) == 0);
  uird_config_free(nullptr);
  uird_run_free(nullptr);
  uird_string_free(nullptr);
}

TEST_CASE("capi: config loading and validation errors") {
  uird_config* cfg = nullptr;
  const char* seed = "seed=11";
  REQUIRE(uird_config_load_text(kConfig, ".", &seed, 1, &cfg) == UIRD_OK);
  CHECK(std::string(uird_last_error()).empty());
  CHECK(std::string(uird_config_name(cfg)) == "capi");
  CHECK(uird_config_seed(cfg) == 11);
  char* doc = nullptr;
  REQUIRE(uird_config_json(cfg, &doc) == UIRD_OK);
  CHECK(json::parse(take(doc))["seed"] == 11);
  uird_config_free(cfg);

  cfg = nullptr;
  const char* bad = "madegan.epochz=3";
  CHECK(uird_config_load_text(kConfig, ".", &bad, 1, &cfg) == UIRD_ERR_VALIDATION);
  CHECK(cfg == nullptr);
  CHECK(std::string(uird_last_error()).find("unknown key 'madegan.epochz'") != std::string::npos);
  CHECK(uird_config_load_text("{", ".", nullptr, 0, &cfg) == UIRD_ERR_VALIDATION);
  CHECK(uird_config_load("/nonexistent/cfg.json", nullptr, 0, &cfg) == UIRD_ERR_VALIDATION);
}

TEST_CASE("capi: run, write, report") {
  TempDir tmp("run");
  uird_config* cfg = fast_config();
  const char* strategies[] = {"uird", "ewc"};
  uird_run* run = nullptr;
  REQUIRE(uird_run_sequence(cfg, strategies, 2, &run) == UIRD_OK);
  CHECK(uird_run_task_count(run) == 3);
  CHECK(std::string(uird_run_class_order(run)) == "NLV");

  char* log = nullptr;
  REQUIRE(uird_run_log(run, &log) == UIRD_OK);
  CHECK(take(log).find("task 0 (N)") != std::string::npos);

  char* reports = nullptr;
  REQUIRE(uird_run_reports_json(run, "ewc", &reports) == UIRD_OK);
  const json r = json::parse(take(reports));
  CHECK(r.is_array());
  CHECK(r.size() <= 2);

  const std::string dir = (tmp.path / "uird").string();
  char* hash = nullptr;
  REQUIRE(uird_run_write(run, "uird", dir.c_str(), &hash) == UIRD_OK);
  const std::string h = take(hash);
  CHECK(h.size() == 40);
  CHECK(json::parse(slurp(tmp.path / "uird" / "manifest.json"))["content_hash"] == h);
  CHECK(uird_run_write(run, "uird", dir.c_str(), nullptr) == UIRD_ERR_IO);
  CHECK(uird_run_write(run, "joint", (tmp.path / "joint").string().c_str(), nullptr) == UIRD_ERR_VALIDATION);
  CHECK(uird_run_write(run, "bogus", (tmp.path / "x").string().c_str(), nullptr) == UIRD_ERR_VALIDATION);

  const char* dirs[] = {dir.c_str()};
  char* table = nullptr;
  REQUIRE(uird_report(dirs, 1, "csv", &table) == UIRD_OK);
  CHECK(!take(table).empty());
  CHECK(uird_report(dirs, 1, "html", &table) == UIRD_ERR_VALIDATION);
  const char* missing[] = {"/nonexistent/run"};
  CHECK(uird_report(missing, 1, "markdown", &table) == UIRD_ERR_VALIDATION);

  // Same seed, same bytes.
  uird_run* again = nullptr;
  REQUIRE(uird_run_sequence(cfg, strategies, 2, &again) == UIRD_OK);
  char* h2 = nullptr;
  REQUIRE(uird_run_write(again, "uird", (tmp.path / "again").string().c_str(), &h2) == UIRD_OK);
  CHECK(take(h2) == h);
  uird_run_free(again);
  uird_run_free(run);
  uird_config_free(cfg);
}

TEST_CASE("capi: synth-data feeds ingestion") {
  TempDir tmp("ingest");
  uird_config* cfg = fast_config();
  char* summary = nullptr;
  REQUIRE(uird_synth_data(cfg, (tmp.path / "synth").string().c_str(), &summary) == UIRD_OK);
  CHECK(json::parse(take(summary))["record"]["beats"] == 95);
  CHECK(uird_ingest(cfg, (tmp.path / "ingest").string().c_str(), nullptr) == UIRD_ERR_VALIDATION);
  uird_config_free(cfg);

  const std::string sig = "ingest.records=[{\"signal\":\"" + (tmp.path / "synth/synthetic.dat").string() +
                          "\",\"annotations\":\"" + (tmp.path / "synth/synthetic_annotations.csv").string() +
                          "\",\"channels\":1}]";
  cfg = fast_config({sig.c_str(), "classes.alphabet=NLV"});
  REQUIRE(uird_ingest(cfg, (tmp.path / "ingest").string().c_str(), &summary) == UIRD_OK);
  const json s = json::parse(take(summary));
  CHECK(s["records"][0]["beats"].get<int>() >= 90);
  CHECK(fs::exists(tmp.path / "ingest" / "train.csv"));
  uird_config_free(cfg);
}

TEST_CASE("cli: exit codes") {
  TempDir tmp("cli");
  const fs::path cfg = tmp.path / "cfg.json";
  std::ofstream(cfg) << kConfig;
  std::string fast;
  for (const char* o : kFast) fast += std::string(" --set '") + o + "'";

  CHECK(cli("--help") == 0);
  CHECK(cli("") == 1);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("run-uird --config " + cfg.string() + " --set bogus=1") == 1);
  CHECK(cli("run-uird --config " + cfg.string() + " --set 'data.counts={\"N\":40}'") == 1);
  CHECK(cli("run-baseline --config " + cfg.string() + " --strategy uird") == 1);
  CHECK(cli("report " + tmp.path.string()) == 1);

  const std::string out = (tmp.path / "runs").string();
  CHECK(cli("run-uird --config " + cfg.string() + fast + " --out " + out) == 0);
  CHECK(fs::exists(tmp.path / "runs" / "capi" / "uird" / "manifest.json"));
  CHECK(cli("run-baseline --config " + cfg.string() + fast + " --strategy ewc --strategy joint --out " + out) == 0);
  CHECK(fs::exists(tmp.path / "runs" / "capi" / "joint" / "manifest.json"));
  // The run directory already exists and is not empty.
  CHECK(cli("run-uird --config " + cfg.string() + fast + " --out " + out) == 2);

  const std::string runs = (tmp.path / "runs" / "capi" / "uird").string() + " " + (tmp.path / "runs" / "capi" / "ewc").string();
  CHECK(cli("report " + runs + " --format json --out " + (tmp.path / "t.json").string()) == 0);
  CHECK(json::parse(slurp(tmp.path / "t.json"))["class_order"] == "NLV");

  ::setenv("UIRD_OUTPUT_ROOT", (tmp.path / "env").string().c_str(), 1);
  CHECK(cli("run-uird --config " + cfg.string() + fast + " --seed 9") == 0);
  ::unsetenv("UIRD_OUTPUT_ROOT");
  CHECK(json::parse(slurp(tmp.path / "env" / "capi" / "uird" / "manifest.json"))["seed"] == 9);
}

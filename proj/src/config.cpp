#include "uird/config.hpp"

#include <cstdlib>
#include <optional>
#include <set>

#include "uird/error.hpp"
#include "uird/io.hpp"

namespace uird::config {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { fail(ErrorKind::Validation, "config: " + msg); }

// Object view that remembers which keys were read, so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad((path_.empty() ? std::string("document") : "'" + path_ + "'") + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, name(key));
  }

  void number(const std::string& key, double& out, double lo, double hi, bool lo_open = false) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) bad("'" + name(key) + "' must be a number");
    const double x = v.get<double>();
    if (!(lo_open ? x > lo : x >= lo) || !(x <= hi))
      bad("'" + name(key) + "' = " + format_double(x) + " is out of range " + (lo_open ? "(" : "[") +
          format_double(lo) + ", " + format_double(hi) + "]");
    out = x;
  }

  void count(const std::string& key, std::size_t& out, std::size_t lo = 0) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      bad("'" + name(key) + "' must be a non-negative integer");
    const auto x = v.get<std::uint64_t>();
    if (x < lo) bad("'" + name(key) + "' must be at least " + std::to_string(lo));
    out = static_cast<std::size_t>(x);
  }

  void flag(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) bad("'" + name(key) + "' must be true or false");
    out = j_.at(key).get<bool>();
  }

  void text(const std::string& key, std::string& out) {
    if (!has(key)) return;
    if (!j_.at(key).is_string()) bad("'" + name(key) + "' must be a string");
    out = j_.at(key).get<std::string>();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) bad("unknown key '" + name(k) + "'");
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path existing_file(Section& s, const std::string& key, const fs::path& base) {
  std::string p;
  s.text(key, p);
  if (p.empty()) bad("'" + s.name(key) + "' must name a file");
  fs::path full = resolve(base, p);
  if (!fs::is_regular_file(full)) bad("'" + s.name(key) + "': no such file " + full.string());
  return full;
}

void read_adam(Section& s, nn::AdamOptions& a) {
  s.number("lr", a.lr, 0.0, 1.0, true);
  s.number("beta1", a.beta1, 0.0, 1.0);
  s.number("beta2", a.beta2, 0.0, 1.0);
  s.number("eps", a.eps, 0.0, 1.0, true);
}

void read_madegan(Section s, pipeline::PipelineConfig& p) {
  auto& a = p.madegan_arch;
  if (s.has("channels")) {
    const json& c = s.raw("channels");
    if (!c.is_array() || c.empty()) bad("'madegan.channels' must be a non-empty array");
    a.channels.clear();
    for (const json& v : c) {
      if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) bad("'madegan.channels' entries must be positive integers");
      a.channels.push_back(v.get<std::size_t>());
    }
  }
  s.count("latent_dim", a.latent_dim, 1);
  s.count("memory_slots", a.memory_slots, 1);
  s.number("slope", a.slope, 0.0, 1.0, true);
  s.flag("batchnorm", a.batchnorm);

  auto& w = p.loss_weights;
  s.number("lambda_rec", w.rec, 0.0, 1e6);
  s.number("lambda_fm", w.fm, 0.0, 1e6);
  s.number("lambda_sp", w.sp, 0.0, 1e6);
  s.number("lambda_adv", w.adv, 0.0, 1e6);
  s.flag("use_memory", w.use_memory);
  s.flag("adversarial", w.adversarial);

  s.count("epochs", p.madegan_train.epochs, 1);
  s.count("finetune_epochs", p.madegan_finetune_epochs, 0);
  s.count("batch_size", p.madegan_train.batch_size, 2);
  read_adam(s, p.madegan_train.generator_adam);
  p.madegan_train.discriminator_adam = p.madegan_train.generator_adam;
  s.number("tau_percentile", p.tau_percentile, 0.0, 100.0, true);
  s.finish();
}

void read_classifier(Section s, pipeline::PipelineConfig& p) {
  auto& a = p.classifier_arch;
  s.count("conv1_channels", a.conv1_channels, 1);
  s.count("conv1_kernel", a.conv1_kernel, 1);
  s.count("conv2_channels", a.conv2_channels, 1);
  s.count("conv2_kernel", a.conv2_kernel, 1);
  s.count("stride", a.stride, 1);
  s.count("hidden1", a.hidden1, 1);
  s.count("hidden2", a.hidden2, 1);
  s.count("epochs", p.classifier_train.epochs, 1);
  s.count("batch_size", p.classifier_train.batch_size, 1);
  s.flag("balanced", p.classifier_train.balanced);
  read_adam(s, p.classifier_train.adam);
  s.finish();
}

void read_data(Section s, DataSource& d, const fs::path& base, const std::string& alphabet) {
  s.text("format", d.format);
  if (d.format == "synthetic") {
    if (!s.has("counts")) bad("'data.counts' is required for synthetic data");
    Section counts = s.child("counts");
    for (const auto& [k, v] : s.raw("counts").items()) {
      if (k.size() != 1 || alphabet.find(k[0]) == std::string::npos || synth::known_classes().find(k[0]) == std::string::npos)
        bad("'data.counts' has unknown class '" + k + "'");
      std::size_t n = 0;
      counts.count(k, n, 1);
      d.counts[k[0]] = n;
    }
    if (d.counts.size() < 2) bad("need >= 2 classes in 'data.counts'");
    std::size_t seed = 0;
    s.count("seed", seed);
    d.seed = seed;
    Section j = s.child("jitter");
    j.number("amplitude", d.jitter.amplitude, 0.0, 1.0);
    j.number("width", d.jitter.width, 0.0, 0.9);
    j.number("shift", d.jitter.shift, 0.0, 100.0);
    j.number("baseline", d.jitter.baseline, 0.0, 10.0);
    j.number("noise", d.jitter.noise, 0.0, 10.0);
    j.finish();
  } else if (d.format == "beatset_csv") {
    if (s.has("paths")) {
      const json& p = s.raw("paths");
      if (!p.is_array() || p.empty()) bad("'data.paths' must be a non-empty array of files");
      for (const json& v : p) {
        if (!v.is_string()) bad("'data.paths' entries must be strings");
        fs::path full = resolve(base, v.get<std::string>());
        if (!fs::is_regular_file(full)) bad("'data.paths': no such file " + full.string());
        d.paths.push_back(full);
      }
      if (s.has("train") || s.has("test")) bad("give either 'data.paths' or 'data.train'/'data.test', not both");
    } else {
      d.train = existing_file(s, "train", base);
      d.test = existing_file(s, "test", base);
    }
  } else {
    bad("'data.format' must be \"synthetic\" or \"beatset_csv\", got \"" + d.format + "\"");
  }
  s.finish();
}

void read_ingest(Section s, IngestConfig& in, const fs::path& base) {
  if (s.has("records")) {
    const json& recs = s.raw("records");
    if (!recs.is_array()) bad("'ingest.records' must be an array");
    for (std::size_t i = 0; i < recs.size(); ++i) {
      Section r(recs[i], "ingest.records[" + std::to_string(i) + "]");
      IngestRecord rec;
      rec.signal = existing_file(r, "signal", base);
      rec.annotations = existing_file(r, "annotations", base);
      std::string format = "wfdb212";
      r.text("format", format);
      if (format != "wfdb212") bad("'" + r.name("format") + "' must be \"wfdb212\"");
      std::size_t channels = 2, channel = 0;
      r.count("channels", channels, 1);
      if (channels > 2) bad("'" + r.name("channels") + "' must be 1 or 2");
      r.count("channel", channel);
      if (channel >= channels) bad("'" + r.name("channel") + "' must be below 'channels'");
      double gain = 200.0, baseline = 0.0;
      r.number("gain", gain, 0.0, 1e9, true);
      r.number("baseline", baseline, -1e9, 1e9);
      r.number("fs", rec.layout.sampling_rate_hz, 100.0, 1e5);
      rec.layout.n_channels = static_cast<int>(channels);
      rec.layout.gains.assign(channels, gain);
      rec.layout.baselines.assign(channels, baseline);
      rec.layout.source_name = rec.signal.filename().string();
      rec.channel = static_cast<int>(channel);
      r.finish();
      in.records.push_back(std::move(rec));
    }
  }
  s.number("highpass_cutoff_hz", in.highpass_cutoff_hz, 0.0, 50.0, true);
  s.count("fir_order", in.fir_order, 3);
  if (in.fir_order % 2 == 0) bad("'ingest.fir_order' must be odd");
  std::string peaks = "detect";
  s.text("peaks", peaks);
  if (peaks != "detect" && peaks != "annotations") bad("'ingest.peaks' must be \"detect\" or \"annotations\"");
  in.annotation_peaks = peaks == "annotations";
  s.number("match_window_s", in.match_window_s, 0.0, 0.5, true);
  s.finish();
}

std::optional<json> try_parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) bad("override '" + assignment + "' must look like key.path=value");
  const std::string path = assignment.substr(0, eq), value = assignment.substr(eq + 1);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) bad("override '" + assignment + "' has an empty key");
    if (!node->is_object()) bad("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      auto parsed = try_parse(value);
      (*node)[key] = parsed ? *parsed : json(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig parse(const json& doc, const fs::path& base_dir) {
  RunConfig cfg;
  cfg.document = doc;
  Section top(doc, "");
  top.text("name", cfg.name);
  if (cfg.name.empty() || cfg.name.find('/') != std::string::npos) bad("'name' must be a non-empty name without '/'");
  if (!top.has("seed")) bad("'seed' is required");
  std::size_t seed = 0;
  top.count("seed", seed);
  cfg.seed = seed;
  cfg.pipeline.seed = seed;
  std::string out;
  top.text("output_dir", out);
  cfg.output_dir = out.empty() ? default_output_root() : resolve(base_dir, out);

  top.text("preset", cfg.preset);
  if (cfg.preset == "desk") {
    cfg.pipeline.madegan_arch = madegan::Architecture::desk();
  } else if (cfg.preset == "paper") {
    cfg.pipeline.madegan_arch = madegan::Architecture::paper();
  } else {
    bad("'preset' must be \"desk\" or \"paper\", got \"" + cfg.preset + "\"");
  }

  Section classes = top.child("classes");
  classes.text("alphabet", cfg.alphabet);
  cfg.alphabet = normalize_alphabet(cfg.alphabet);
  std::string order = "sample_size";
  classes.text("order", order);
  if (order != "sample_size") {
    for (char c : order) {
      if (cfg.alphabet.find(c) == std::string::npos) bad(std::string("'classes.order' names '") + c + "', which is not in the alphabet");
    }
    cfg.order = order;
  }
  classes.finish();

  Section split = top.child("split");
  split.number("test_fraction", cfg.pipeline.test_fraction, 0.0, 1.0, true);
  split.number("calibration_fraction", cfg.pipeline.calibration_fraction, 0.0, 1.0, true);
  if (cfg.pipeline.test_fraction >= 1.0 || cfg.pipeline.calibration_fraction >= 1.0) bad("split fractions must be below 1");
  split.finish();

  read_madegan(top.child("madegan"), cfg.pipeline);
  Section smote = top.child("smote");
  smote.count("k", cfg.pipeline.smote_k, 1);
  smote.finish();
  read_classifier(top.child("classifier"), cfg.pipeline);
  Section ewc = top.child("ewc");
  ewc.number("lambda", cfg.pipeline.ewc_lambda, 0.0, 1e12);
  ewc.count("fisher_samples", cfg.pipeline.fisher_samples, 1);
  ewc.finish();
  Section pipe = top.child("pipeline");
  pipe.count("min_novel_count", cfg.pipeline.min_novel_count, 1);
  pipe.flag("shared_task1_stage", cfg.pipeline.shared_task1_stage);
  pipe.finish();

  if (top.has("data")) read_data(top.child("data"), cfg.data, base_dir, cfg.alphabet);
  else bad("'data' is required");
  read_ingest(top.child("ingest"), cfg.ingest, base_dir);
  top.finish();

  // Shape checks that need the whole architecture.
  try {
    madegan::Model probe(cfg.pipeline.madegan_arch, cfg.pipeline.loss_weights, 0);
    classifier::BeatClassifier c("NL", cfg.pipeline.classifier_arch, 0);
  } catch (const Error& e) {
    bad(std::string("architecture: ") + e.what());
  }
  return cfg;
}

RunConfig load_text(const std::string& text, const fs::path& base_dir, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("config: not valid JSON: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse(doc, base_dir);
}

RunConfig load(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::is_regular_file(path)) fail(ErrorKind::Validation, "config: no such file " + path.string());
  return load_text(read_file(path), path.parent_path(), overrides);
}

BeatSet load_beats(const RunConfig& cfg) {
  BeatSet beats;
  if (cfg.data.format == "synthetic") {
    beats = synth::make_beats(cfg.data.counts, cfg.data.seed, cfg.data.jitter);
  } else {
    for (const auto& p : cfg.data.paths) {
      BeatSet part = ingest::load_beatset_csv(p, cfg.alphabet);
      beats.insert(beats.end(), part.begin(), part.end());
    }
  }
  for (Beat& b : beats) b = ingest::standardize(std::move(b));
  return beats;
}

pipeline::TaskStream make_stream(const RunConfig& cfg) {
  if (cfg.data.format == "beatset_csv" && cfg.data.paths.empty()) {
    auto load = [&](const fs::path& p) {
      BeatSet b = ingest::load_beatset_csv(p, cfg.alphabet);
      for (Beat& x : b) x = ingest::standardize(std::move(x));
      return b;
    };
    return pipeline::make_stream(load(cfg.data.train), load(cfg.data.test), cfg.order);
  }
  return pipeline::make_stream(load_beats(cfg), cfg.pipeline.test_fraction, cfg.seed, cfg.order);
}

fs::path default_output_root() {
  const char* env = std::getenv("UIRD_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

}  // namespace uird::config

#include "uird/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uird/error.hpp"
#include "uird/rng.hpp"

namespace uird::synth {
namespace {

const std::map<char, std::vector<Bump>>& templates() {
  static const std::map<char, std::vector<Bump>> t = {
      // P, Q, R, S, T
      {'N', {{-70, 0.15, 10}, {-12, -0.10, 3}, {0, 1.00, 4}, {12, -0.20, 3}, {100, 0.30, 18}}},
      // broad notched R, discordant T
      {'L', {{-80, 0.12, 10}, {-8, 0.70, 9}, {10, 0.80, 9}, {110, -0.35, 20}}},
      // rSR' with a wide S
      {'R', {{-70, 0.15, 10}, {0, 0.80, 4}, {14, -0.35, 6}, {28, 0.50, 6}, {110, 0.20, 18}}},
      // no P, wide bizarre QRS, large inverted T
      {'V', {{0, 1.20, 14}, {30, -0.60, 14}, {110, -0.50, 25}}},
      // early inverted P, otherwise narrow
      {'A', {{-40, -0.15, 8}, {-12, -0.10, 3}, {0, 1.00, 4}, {12, -0.20, 3}, {90, 0.30, 16}}},
      // fusion: midway between N and V
      {'f', {{-70, 0.08, 10}, {0, 1.10, 8}, {24, -0.40, 10}, {105, -0.10, 22}}},
  };
  return t;
}

double eval_bumps(const std::vector<Bump>& bumps, double t, double amp, double width, double shift) {
  double v = 0.0;
  for (const Bump& b : bumps) {
    const double w = b.width * width;
    const double d = t - (b.offset + shift);
    v += amp * b.amplitude * std::exp(-0.5 * d * d / (w * w));
  }
  return v;
}

double uniform_pm(Rng& rng, double half) { return (2.0 * uniform_closed(rng) - 1.0) * half; }

std::vector<double> render(char label, std::size_t length, Rng* rng, const BeatJitter& j) {
  const auto& bumps = template_for(label);
  double amp = 1.0, width = 1.0, shift = 0.0, base = 0.0;
  if (rng) {
    amp += uniform_pm(*rng, j.amplitude);
    width += uniform_pm(*rng, j.width);
    shift = uniform_pm(*rng, j.shift);
    base = uniform_pm(*rng, j.baseline);
  }
  std::normal_distribution<double> noise(0.0, j.noise);
  std::vector<double> out(length);
  const double centre = static_cast<double>(length / 2);
  for (std::size_t i = 0; i < length; ++i) {
    out[i] = base + eval_bumps(bumps, static_cast<double>(i) - centre, amp, width, shift);
    if (rng && j.noise > 0) out[i] += noise(*rng);
  }
  return out;
}

}  // namespace

std::string known_classes() {
  std::string s;
  for (const auto& [k, v] : templates()) s += k;
  return s;
}

const std::vector<Bump>& template_for(char label) {
  auto it = templates().find(label);
  if (it == templates().end()) fail(ErrorKind::Validation, std::string("no synthetic template for class '") + label + "'");
  return it->second;
}

std::vector<double> render_template(char label, std::size_t length) { return render(label, length, nullptr, {}); }

BeatSet make_beats(const std::map<char, std::size_t>& counts, std::uint64_t seed, const BeatJitter& jitter,
                   std::size_t length) {
  BeatSet out;
  for (const auto& [label, count] : counts) {
    Rng rng(splitmix64(seed ^ (static_cast<std::uint64_t>(static_cast<unsigned char>(label)) << 32)));
    for (std::size_t i = 0; i < count; ++i) {
      Beat b;
      b.label = label;
      b.values = render(label, length, &rng, jitter);
      out.push_back(std::move(b));
    }
  }
  return out;
}

Record make_record(const std::map<char, std::size_t>& counts, std::uint64_t seed, double fs,
                   const BeatJitter& jitter) {
  if (!(fs >= 100.0)) fail(ErrorKind::Validation, "synthetic record: sampling rate must be at least 100 Hz");
  std::vector<char> order;
  for (const auto& [label, count] : counts) {
    template_for(label);
    order.insert(order.end(), count, label);
  }
  Rng rng(splitmix64(seed));
  std::shuffle(order.begin(), order.end(), rng);

  // Templates are authored at 360 Hz; rescale offsets to fs.
  const double scale = fs / 360.0;
  const double lead = std::ceil(1.0 * fs);
  std::vector<double> r_times;
  double t = lead;
  for (std::size_t i = 0; i < order.size(); ++i) {
    r_times.push_back(std::round(t));
    t += (0.8 + uniform_pm(rng, 0.08)) * fs;
  }
  const std::size_t n = static_cast<std::size_t>(t + lead);

  Record rec;
  rec.signal.sampling_rate_hz = fs;
  rec.signal.source_name = "synthetic";
  rec.signal.samples.assign(n, 0.0);
  std::normal_distribution<double> noise(0.0, jitter.noise);
  const double wander_phase = uniform_closed(rng) * 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    rec.signal.samples[i] = 0.1 * std::sin(2.0 * std::numbers::pi * 0.2 * static_cast<double>(i) / fs + wander_phase) +
                            (jitter.noise > 0 ? noise(rng) : 0.0);
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double amp = 1.0 + uniform_pm(rng, jitter.amplitude);
    const double width = (1.0 + uniform_pm(rng, jitter.width)) * scale;
    const auto& bumps = template_for(order[k]);
    const long r = static_cast<long>(r_times[k]);
    const long reach = static_cast<long>(std::ceil(0.6 * fs));
    for (long i = std::max(0L, r - reach); i < std::min(static_cast<long>(n), r + reach); ++i) {
      double v = 0.0;
      for (const Bump& b : bumps) {
        const double w = b.width * width;
        const double d = static_cast<double>(i - r) - b.offset * scale;
        v += amp * b.amplitude * std::exp(-0.5 * d * d / (w * w));
      }
      rec.signal.samples[i] += v;
    }
    rec.annotations.push_back({static_cast<std::size_t>(r), order[k]});
  }
  return rec;
}

PulseTrain make_pulse_train(std::size_t pulses, double rate_hz, double fs, double sigma_s, double snr_db,
                            std::uint64_t seed) {
  if (!(rate_hz > 0 && fs > 0 && sigma_s > 0)) fail(ErrorKind::Validation, "pulse train: bad parameters");
  PulseTrain out;
  const double duration = static_cast<double>(pulses) / rate_hz;
  const std::size_t n = static_cast<std::size_t>(std::llround(duration * fs));
  out.signal.sampling_rate_hz = fs;
  out.signal.source_name = "pulse-train";
  out.signal.samples.assign(n, 0.0);
  const double s = sigma_s * fs;
  for (std::size_t k = 0; k < pulses; ++k) {
    const double c = (0.5 + static_cast<double>(k)) / rate_hz * fs;
    out.centers.push_back(static_cast<std::size_t>(std::llround(c)));
    const long lo = std::max(0L, static_cast<long>(c - 8 * s));
    const long hi = std::min(static_cast<long>(n) - 1, static_cast<long>(c + 8 * s));
    for (long i = lo; i <= hi; ++i) {
      const double u = (static_cast<double>(i) - c) / s;
      out.signal.samples[i] += -u * std::exp(0.5 - 0.5 * u * u);
    }
  }
  if (std::isfinite(snr_db)) {
    double power = 0.0;
    for (double v : out.signal.samples) power += v * v;
    power /= static_cast<double>(n);
    const double sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    Rng rng(splitmix64(seed));
    std::normal_distribution<double> noise(0.0, sd);
    for (double& v : out.signal.samples) v += noise(rng);
  }
  return out;
}

}  // namespace uird::synth

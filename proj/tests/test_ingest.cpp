#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "uird/error.hpp"
#include "uird/ingest.hpp"
#include "uird/synth.hpp"

using namespace uird;
using namespace uird::ingest;

namespace {

// Independent unpacker: treat the frame as a little-endian 24-bit word and
// read the two nibble-split fields straight off the bit diagram
//   byte1 = [B11..B8 | A11..A8]
int ref_field(std::uint32_t word, bool second) {
  const std::uint32_t b0 = word & 0xFF, b1 = (word >> 8) & 0xFF, b2 = (word >> 16) & 0xFF;
  std::uint32_t v = second ? (b2 + 256 * (b1 / 16)) : (b0 + 256 * (b1 % 16));
  return v >= 2048 ? static_cast<int>(v) - 4096 : static_cast<int>(v);
}

std::size_t count_within(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& found,
                         std::size_t tol) {
  std::size_t hits = 0;
  for (std::size_t t : truth) {
    for (std::size_t f : found) {
      if ((f > t ? f - t : t - f) <= tol) {
        ++hits;
        break;
      }
    }
  }
  return hits;
}

RawSignal make_signal(std::vector<double> v, double fs = 360.0) {
  RawSignal s;
  s.samples = std::move(v);
  s.sampling_rate_hz = fs;
  return s;
}

}  // namespace

TEST_CASE("212 worked frames") {
  CHECK(decode_212_frame(0x00, 0x00, 0x00) == std::pair{0, 0});
  CHECK(decode_212_frame(0xFF, 0x0F, 0x00) == std::pair{-1, 0});
  CHECK(decode_212_frame(0x00, 0xF0, 0xFF) == std::pair{0, -1});
  CHECK(decode_212_frame(0xFF, 0x77, 0xFF) == std::pair{2047, 2047});
  CHECK(decode_212_frame(0x00, 0x88, 0x00) == std::pair{-2048, -2048});

  const std::uint8_t bytes[] = {0xFF, 0x0F, 0x00};
  Wfdb212Layout layout;
  layout.n_channels = 1;
  layout.gains = {1.0};
  layout.baselines = {0.0};
  auto sig = parse_wfdb212(bytes, layout);
  REQUIRE(sig.size() == 1);
  CHECK(sig[0].samples == std::vector<double>{-1.0, 0.0});
}

TEST_CASE("212 decode matches the reference unpacker and round-trips") {
  std::mt19937_64 rng(212);
  std::uniform_int_distribution<std::uint32_t> frame(0, 0xFFFFFF);
  std::uniform_int_distribution<int> sample(-2048, 2047);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::uint32_t w = frame(rng);
    const std::uint8_t b0 = w & 0xFF, b1 = (w >> 8) & 0xFF, b2 = (w >> 16) & 0xFF;
    auto [a, b] = decode_212_frame(b0, b1, b2);
    REQUIRE(a == ref_field(w, false));
    REQUIRE(b == ref_field(w, true));
    auto back = encode_212_frame(a, b);
    REQUIRE(back == std::array<std::uint8_t, 3>{b0, b1, b2});

    const int x = sample(rng), y = sample(rng);
    auto f = encode_212_frame(x, y);
    REQUIRE(decode_212_frame(f[0], f[1], f[2]) == std::pair{x, y});
  }
}

TEST_CASE("212 de-interleaves channels and applies gain and baseline") {
  auto bytes = encode_wfdb212({{10, 20, 30}, {-5, 0, 5}});
  Wfdb212Layout layout;
  layout.gains = {10.0, 5.0};
  layout.baselines = {10.0, 0.0};
  auto sig = parse_wfdb212(bytes, layout);
  REQUIRE(sig.size() == 2);
  CHECK(sig[0].samples == std::vector<double>{0.0, 1.0, 2.0});
  CHECK(sig[1].samples == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(sig[1].channel_id == 1);
}

TEST_CASE("212 errors") {
  Wfdb212Layout layout;
  const std::uint8_t truncated[] = {1, 2, 3, 4, 5};
  try {
    parse_wfdb212(truncated, layout);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("offset 3") != std::string::npos);
  }
  const std::uint8_t ok[] = {0, 0, 0};
  layout.n_channels = 3;
  CHECK_THROWS_AS(parse_wfdb212(ok, layout), Error);
  layout.n_channels = 2;
  layout.gains = {1.0, 0.0};
  CHECK_THROWS_AS(parse_wfdb212(ok, layout), Error);
  CHECK_THROWS_AS(encode_212_frame(2048, 0), Error);
}

TEST_CASE("beatset csv") {
  std::string line = "N";
  for (int i = 0; i < 320; ++i) line += ",0.0";
  auto beats = parse_beatset_csv(line + "\n", "NLV");
  REQUIRE(beats.size() == 1);
  CHECK(beats[0].label == 'N');
  CHECK(beats[0].values == std::vector<double>(320, 0.0));
  CHECK_FALSE(beats[0].standardized);
  CHECK_FALSE(beats[0].synthetic);

  CHECK(parse_beatset_csv("", "NLV").empty());

  auto error_of = [](const std::string& text) {
    try {
      parse_beatset_csv(text, "NLV");
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  std::string short_line = "N";
  for (int i = 0; i < 319; ++i) short_line += ",1";
  CHECK(error_of(line + "\n" + short_line + "\n").find("line 2") != std::string::npos);
  std::string bad_label = line;
  bad_label[0] = 'Q';
  CHECK(error_of(bad_label).find("unknown label") != std::string::npos);
  std::string bad_value = line;
  bad_value.replace(bad_value.find("0.0"), 3, "abc");
  CHECK(error_of(bad_value).find("non-numeric") != std::string::npos);

  BeatSet mixed = synth::make_beats({{'N', 2}, {'V', 1}}, 3);
  mixed[2].synthetic = true;
  auto back = parse_beatset_csv(format_beatset_csv(mixed, true), "NV");
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].values == mixed[i].values);
    CHECK(back[i].label == mixed[i].label);
    CHECK(back[i].synthetic == mixed[i].synthetic);
  }
}

TEST_CASE("annotation sidecar") {
  auto ann = parse_annotations("# comment\n100,N\n\n460,V\n");
  REQUIRE(ann.size() == 2);
  CHECK(ann[1].sample_index == 460);
  CHECK(ann[1].symbol == 'V');
  CHECK_THROWS_AS(parse_annotations("12,NN\n"), Error);
  CHECK_THROWS_AS(parse_annotations("-1,N\n"), Error);
}

TEST_CASE("highpass taps have zero DC gain and kill a constant") {
  auto h = design_highpass_fir(0.5, 360.0, 101);
  double sum = 0.0;
  for (double v : h) sum += v;
  CHECK(std::fabs(sum) < 1e-9);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == doctest::Approx(h[h.size() - 1 - i]).epsilon(1e-12));

  for (double amp : {1.0, -3.5, 250.0}) {
    auto y = highpass_fir(make_signal(std::vector<double>(2000, amp)));
    REQUIRE(y.samples.size() == 2000);
    double worst = 0.0;
    for (std::size_t i = 100; i + 100 < y.samples.size(); ++i) worst = std::max(worst, std::fabs(y.samples[i]));
    CHECK(worst < 1e-6 * std::max(1.0, std::fabs(amp)));
  }
}

TEST_CASE("highpass passes 10 Hz as predicted by the taps' frequency response") {
  const double fs = 360.0, f = 10.0;
  auto h = design_highpass_fir(0.5, fs, 101);
  // DTFT magnitude of the designed taps at 10 Hz.
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    re += h[n] * std::cos(2 * std::numbers::pi * f / fs * n);
    im -= h[n] * std::sin(2 * std::numbers::pi * f / fs * n);
  }
  const double gain = std::hypot(re, im);
  CHECK(std::fabs(gain - 1.0) < 0.01);

  std::vector<double> x(3600);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 2.0 * std::sin(2 * std::numbers::pi * f * i / fs);
  auto y = highpass_fir(make_signal(x));
  double peak = 0.0;
  for (std::size_t i = 200; i + 200 < x.size(); ++i) {
    peak = std::max(peak, std::fabs(y.samples[i]));
    // Linear phase with the delay compensated: output stays aligned.
    REQUIRE(std::fabs(y.samples[i] - gain * x[i]) < 0.01);
  }
  CHECK(std::fabs(peak / 2.0 - 1.0) < 0.01);
  CHECK(peak / 2.0 == doctest::Approx(gain).epsilon(1e-3));

  CHECK_THROWS_AS(highpass_fir(make_signal(x), 180.0), Error);
  CHECK_THROWS_AS(highpass_fir(make_signal(x), 0.0), Error);
  CHECK_THROWS_AS(highpass_fir(make_signal(x), 0.5, 100), Error);
}

TEST_CASE("Pan-Tompkins on a clean pulse train") {
  auto train = synth::make_pulse_train();
  REQUIRE(train.centers.size() == 30);
  auto peaks = detect_r_peaks(train.signal);
  CHECK(peaks.size() == 30);
  CHECK(count_within(train.centers, peaks, 10) == 30);
  CHECK(detect_r_peaks(train.signal) == peaks);
}

TEST_CASE("Pan-Tompkins with 20 dB SNR noise") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    auto train = synth::make_pulse_train(30, 1.0, 360.0, 0.01, 20.0, seed);
    auto peaks = detect_r_peaks(train.signal);
    CHECK(count_within(train.centers, peaks, 15) >= 29);
    CHECK(peaks.size() <= 31);
  }
}

TEST_CASE("Pan-Tompkins edge cases") {
  CHECK(detect_r_peaks(make_signal(std::vector<double>(3600, 0.0))).empty());
  CHECK_THROWS_AS(detect_r_peaks(make_signal(std::vector<double>(700, 0.0))), Error);
  CHECK_THROWS_AS(detect_r_peaks(make_signal(std::vector<double>(7000, 0.0), 50.0)), Error);
}

TEST_CASE("Pan-Tompkins on a synthetic ECG record") {
  auto rec = synth::make_record({{'N', 40}, {'V', 10}}, 11);
  auto filtered = highpass_fir(rec.signal);
  auto peaks = detect_r_peaks(filtered);
  std::vector<std::size_t> truth;
  for (const auto& a : rec.annotations) truth.push_back(a.sample_index);
  CHECK(count_within(truth, peaks, 18) >= 48);
  CHECK(peaks.size() <= 52);
}

TEST_CASE("segment_beats windows and drops") {
  std::vector<double> v(320);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  RawSignal s = make_signal(v);
  const std::vector<Annotation> ann{{160, 'N'}};

  std::vector<std::size_t> at160{160};
  auto r = segment_beats(s, at160, ann);
  REQUIRE(r.beats.size() == 1);
  CHECK(r.beats[0].values.front() == 0.0);
  CHECK(r.beats[0].values.back() == 319.0);
  CHECK(r.beats[0].values.size() == kBeatLength);
  CHECK(r.beats[0].r_peak_index == 160);

  std::vector<std::size_t> at100{100};
  r = segment_beats(s, at100, ann);
  CHECK(r.beats.empty());
  CHECK(r.dropped_boundary == 1);

  RawSignal long_sig = make_signal(std::vector<double>(2000, 1.0));
  std::vector<std::size_t> peak{1000};
  const std::vector<Annotation> far{{1019, 'N'}};
  r = segment_beats(long_sig, peak, far);
  CHECK(r.beats.empty());
  CHECK(r.dropped_unlabeled == 1);

  // 18 samples = 50 ms at 360 Hz: inside. Equal distance: earlier wins.
  const std::vector<Annotation> tie{{1010, 'V'}, {990, 'L'}, {1018 + 20, 'N'}};
  r = segment_beats(long_sig, peak, tie);
  REQUIRE(r.beats.size() == 1);
  CHECK(r.beats[0].label == 'L');
  const std::vector<Annotation> edge{{1018, 'V'}};
  CHECK(segment_beats(long_sig, peak, edge).beats.size() == 1);
}

TEST_CASE("standardize") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(3.0, 7.0);
  for (int trial = 0; trial < 50; ++trial) {
    Beat b;
    b.values.resize(kBeatLength);
    for (double& v : b.values) v = g(rng);
    Beat z = standardize(b);
    double mean = 0, var = 0;
    for (double v : z.values) mean += v;
    mean /= kBeatLength;
    for (double v : z.values) var += (v - mean) * (v - mean);
    CHECK(std::fabs(mean) < 1e-6);
    CHECK(std::fabs(std::sqrt(var / kBeatLength) - 1.0) < 1e-6);
    CHECK(z.standardized);
    CHECK_FALSE(z.degenerate);
  }

  Beat flat;
  flat.values.assign(kBeatLength, 4.2);
  Beat z = standardize(flat);
  CHECK(z.degenerate);
  CHECK(z.values == std::vector<double>(kBeatLength, 0.0));

  Beat one, ten;
  for (std::size_t i = 0; i < kBeatLength; ++i) {
    one.values.push_back(i % 2 ? 3.0 : 1.0);
    ten.values.push_back(one.values.back() * 10.0);
  }
  auto a = standardize(one).values, c = standardize(ten).values;
  for (std::size_t i = 0; i < kBeatLength; ++i) CHECK(a[i] == doctest::Approx(c[i]).epsilon(1e-12));
}

TEST_CASE("stratified split") {
  BeatSet ten(10);
  for (auto& b : ten) b.label = 'N';
  auto [tr, te] = split_train_test(ten, 0.8, 1);
  CHECK(tr.size() == 8);
  CHECK(te.size() == 2);

  BeatSet hundred = synth::make_beats({{'N', 50}, {'V', 50}}, 4);
  auto [a1, b1] = split_train_test(hundred, 0.8, 9);
  auto [a2, b2] = split_train_test(hundred, 0.8, 9);
  CHECK(select_label(a1, 'N').size() == 40);
  CHECK(select_label(a1, 'V').size() == 40);
  CHECK(select_label(b1, 'N').size() == 10);
  REQUIRE(a1.size() == a2.size());
  for (std::size_t i = 0; i < a1.size(); ++i) CHECK(a1[i].values == a2[i].values);

  // Property: per-class counts within one of the ratio, partition is total.
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    std::map<char, std::size_t> counts{{'N', rng() % 40}, {'L', rng() % 40 + 1}, {'V', rng() % 7}};
    const double ratio = static_cast<double>(rng() % 101) / 100.0;
    BeatSet all = synth::make_beats(counts, trial);
    auto [train, test] = split_train_test(all, ratio, trial);
    CHECK(train.size() + test.size() == all.size());
    for (auto [label, n] : counts) {
      const double got = static_cast<double>(select_label(train, label).size());
      CHECK(std::fabs(got - ratio * static_cast<double>(n)) <= 1.0);
    }
  }
}

TEST_CASE("record to beats end to end") {
  auto rec = synth::make_record({{'N', 30}, {'L', 20}}, 21);
  auto filtered = highpass_fir(rec.signal);
  auto peaks = detect_r_peaks(filtered);
  auto seg = segment_beats(filtered, peaks, rec.annotations);
  CHECK(seg.beats.size() >= 47);
  std::size_t agree = 0;
  for (const Beat& b : seg.beats) {
    CHECK(b.values.size() == kBeatLength);
    for (const auto& a : rec.annotations) {
      if (static_cast<long>(a.sample_index) == b.r_peak_index || std::labs(static_cast<long>(a.sample_index) - b.r_peak_index) <= 18) {
        agree += a.symbol == b.label;
        break;
      }
    }
  }
  CHECK(agree == seg.beats.size());
}

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uird/error.hpp"
#include "uird/ingest.hpp"

namespace uird::ingest {
namespace {

void check_signal(const RawSignal& s, const char* who) {
  if (s.samples.empty()) fail(ErrorKind::Validation, std::string(who) + ": empty signal");
  if (!(s.sampling_rate_hz > 0.0)) fail(ErrorKind::Validation, std::string(who) + ": sampling rate must be positive");
  for (double v : s.samples) {
    if (!std::isfinite(v)) fail(ErrorKind::Validation, std::string(who) + ": non-finite sample");
  }
}

struct Biquad {
  double b0, b1, b2, a1, a2;

  std::vector<double> run(const std::vector<double>& x) const {
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double v = b0 * x[n] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[n];
      y2 = y1;
      y1 = v;
      y[n] = v;
    }
    return y;
  }
};

// Second-order Butterworth sections (Q = 1/sqrt 2), bilinear transform.
Biquad butter2(double f0, double fs, bool highpass) {
  const double w0 = 2.0 * std::numbers::pi * f0 / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad q{};
  if (highpass) {
    q.b0 = (1.0 + c) / 2.0 / a0;
    q.b1 = -(1.0 + c) / a0;
  } else {
    q.b0 = (1.0 - c) / 2.0 / a0;
    q.b1 = (1.0 - c) / a0;
  }
  q.b2 = q.b0;
  q.a1 = -2.0 * c / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

std::vector<double> filtfilt(const Biquad& q, std::vector<double> x) {
  x = q.run(x);
  std::reverse(x.begin(), x.end());
  x = q.run(x);
  std::reverse(x.begin(), x.end());
  return x;
}

std::size_t samples_for(double seconds, double fs) {
  return static_cast<std::size_t>(std::lround(seconds * fs));
}

}  // namespace

std::vector<double> design_highpass_fir(double cutoff_hz, double sampling_rate_hz, std::size_t taps) {
  if (!(sampling_rate_hz > 0.0)) fail(ErrorKind::Validation, "highpass: sampling rate must be positive");
  if (!(cutoff_hz > 0.0 && cutoff_hz < sampling_rate_hz / 2.0))
    fail(ErrorKind::Validation, "highpass: cutoff must lie strictly between 0 and Nyquist");
  if (taps < 3 || taps % 2 == 0) fail(ErrorKind::Validation, "highpass: order must be odd and >= 3");

  const double fc = cutoff_hz / sampling_rate_hz;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  std::vector<double> h(taps);
  double dc = 0.0;
  for (std::size_t n = 0; n < taps; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double sinc = t == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(taps - 1));
    h[n] = sinc * w;
    dc += h[n];
  }
  for (double& v : h) v = -v / dc;
  h[taps / 2] += 1.0;
  return h;
}

RawSignal highpass_fir(const RawSignal& signal, double cutoff_hz, std::size_t order) {
  check_signal(signal, "highpass");
  const std::vector<double> h = design_highpass_fir(cutoff_hz, signal.sampling_rate_hz, order);
  const std::vector<double>& x = signal.samples;
  const long n = static_cast<long>(x.size());
  const long m = static_cast<long>(order / 2);
  RawSignal out = signal;
  for (long i = 0; i < n; ++i) {
    // y[i] = sum_k h[k] x[i + m - k], zero outside the record.
    const long k_lo = std::max(0L, i + m - (n - 1));
    const long k_hi = std::min(static_cast<long>(order) - 1, i + m);
    double acc = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) acc += h[k] * x[i + m - k];
    out.samples[i] = acc;
  }
  return out;
}

std::vector<std::size_t> detect_r_peaks(const RawSignal& signal, const PanTompkinsOptions& o) {
  check_signal(signal, "detect_r_peaks");
  const double fs = signal.sampling_rate_hz;
  if (fs < 100.0) fail(ErrorKind::Validation, "detect_r_peaks: sampling rate must be at least 100 Hz");
  const std::vector<double>& x = signal.samples;
  const std::size_t n = x.size();
  const std::size_t init_len = samples_for(2.0, fs);
  if (n < init_len) fail(ErrorKind::Validation, "detect_r_peaks: record shorter than 2 s");
  if (!(o.band_low_hz > 0 && o.band_low_hz < o.band_high_hz && o.band_high_hz < fs / 2))
    fail(ErrorKind::Validation, "detect_r_peaks: bad band edges");

  // Band-pass, zero phase so detections are not delayed.
  std::vector<double> bp = filtfilt(butter2(o.band_low_hz, fs, true), x);
  bp = filtfilt(butter2(o.band_high_hz, fs, false), bp);

  // Five-point derivative, centred.
  auto at = [&](long i) { return i < 0 || i >= static_cast<long>(n) ? 0.0 : bp[i]; };
  std::vector<double> slope(n), sq(n);
  for (long i = 0; i < static_cast<long>(n); ++i) {
    slope[i] = (2.0 * at(i + 1) + at(i + 2) - at(i - 2) - 2.0 * at(i - 1)) * fs / 8.0;
    sq[i] = slope[i] * slope[i];
  }

  // Centred moving-window integration.
  const std::size_t win = std::max<std::size_t>(1, samples_for(o.integration_window_s, fs)) | 1;
  const long half = static_cast<long>(win / 2);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + sq[i];
  std::vector<double> mwi(n);
  for (long i = 0; i < static_cast<long>(n); ++i) {
    const long lo = std::max(0L, i - half);
    const long hi = std::min(static_cast<long>(n), i + half + 1);
    mwi[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(win);
  }

  const double peak_mwi = *std::max_element(mwi.begin(), mwi.end());
  if (!(peak_mwi > 1e-300)) return {};

  // Candidate peaks of the integrated signal.
  struct Candidate {
    std::size_t pos;
    double mwi, filt, slope;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1]) {
      const std::size_t lo = i > static_cast<std::size_t>(half) ? i - half : 0;
      const std::size_t hi = std::min(n - 1, i + half);
      double f = 0.0, s = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) {
        f = std::max(f, std::fabs(bp[j]));
        s = std::max(s, std::fabs(slope[j]));
      }
      cands.push_back({i, mwi[i], f, s});
    }
  }

  // Thresholds learned over the first two seconds.
  double spki = 0.0, npki = 0.0, spkf = 0.0, npkf = 0.0;
  for (std::size_t i = 0; i < init_len; ++i) {
    spki = std::max(spki, mwi[i]);
    spkf = std::max(spkf, std::fabs(bp[i]));
    npki += mwi[i];
    npkf += std::fabs(bp[i]);
  }
  spki *= 0.25;
  spkf *= 0.25;
  npki = 0.5 * npki / static_cast<double>(init_len);
  npkf = 0.5 * npkf / static_cast<double>(init_len);

  const std::size_t refractory = samples_for(o.refractory_s, fs);
  const std::size_t t_wave = samples_for(o.t_wave_window_s, fs);
  std::vector<std::size_t> qrs;
  std::vector<double> rr;
  double last_slope = 0.0, last_mwi = 0.0;
  std::vector<Candidate> noise_since_qrs;

  auto th_i1 = [&] { return npki + 0.25 * (spki - npki); };
  auto th_f1 = [&] { return npkf + 0.25 * (spkf - npkf); };
  auto rr_mean = [&] {
    const std::size_t k = std::min<std::size_t>(8, rr.size());
    double s = 0.0;
    for (std::size_t i = rr.size() - k; i < rr.size(); ++i) s += rr[i];
    return s / static_cast<double>(k);
  };
  auto accept = [&](const Candidate& c, bool searchback) {
    if (!qrs.empty()) rr.push_back(static_cast<double>(c.pos - qrs.back()));
    qrs.push_back(c.pos);
    last_slope = c.slope;
    last_mwi = c.mwi;
    const double w = searchback ? 0.25 : 0.125;
    spki = w * c.mwi + (1.0 - w) * spki;
    spkf = w * c.filt + (1.0 - w) * spkf;
    noise_since_qrs.clear();
  };
  auto searchback_until = [&](std::size_t pos) {
    if (qrs.empty() || rr.empty()) return;
    if (static_cast<double>(pos - qrs.back()) <= o.searchback_factor * rr_mean()) return;
    const Candidate* best = nullptr;
    for (const Candidate& c : noise_since_qrs) {
      if (c.pos - qrs.back() < refractory || c.pos >= pos) continue;
      if (c.mwi > 0.5 * th_i1() && c.filt > 0.5 * th_f1() && (!best || c.mwi > best->mwi)) best = &c;
    }
    if (best) {
      const Candidate found = *best;
      accept(found, true);
    }
  };

  for (const Candidate& c : cands) {
    searchback_until(c.pos);
    if (!qrs.empty() && c.pos - qrs.back() < refractory) {
      // A ripple on the rising edge fired first; slide onto the true crest.
      if (c.mwi > last_mwi) {
        if (!rr.empty() && qrs.size() > 1) rr.back() += static_cast<double>(c.pos - qrs.back());
        qrs.back() = c.pos;
        last_mwi = c.mwi;
        last_slope = std::max(last_slope, c.slope);
      }
      continue;
    }
    bool is_qrs = c.mwi > th_i1() && c.filt > th_f1();
    if (is_qrs && !qrs.empty() && c.pos - qrs.back() < t_wave && c.slope < 0.5 * last_slope) is_qrs = false;
    if (is_qrs) {
      accept(c, false);
    } else {
      npki = 0.125 * c.mwi + 0.875 * npki;
      npkf = 0.125 * c.filt + 0.875 * npkf;
      noise_since_qrs.push_back(c);
    }
  }
  searchback_until(n);

  // Move each detection onto the input's local maximum.
  const std::size_t refine = samples_for(o.refine_window_s, fs);
  std::vector<std::size_t> peaks;
  for (std::size_t p : qrs) {
    const std::size_t lo = p > refine ? p - refine : 0;
    const std::size_t hi = std::min(n - 1, p + refine);
    std::size_t best = lo;
    for (std::size_t j = lo + 1; j <= hi; ++j) {
      if (x[j] > x[best]) best = j;
    }
    if (peaks.empty() || (best > peaks.back() && best - peaks.back() >= refractory)) peaks.push_back(best);
  }
  return peaks;
}

}  // namespace uird::ingest

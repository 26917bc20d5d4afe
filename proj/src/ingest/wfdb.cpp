#include <cmath>

#include "uird/error.hpp"
#include "uird/ingest.hpp"

namespace uird::ingest {
namespace {

int sign_extend12(int v) { return (v & 0x800) ? v - 0x1000 : v; }

void check_raw(int v) {
  if (v < -2048 || v > 2047) fail(ErrorKind::Validation, "212 sample out of 12-bit range: " + std::to_string(v));
}

}  // namespace

std::pair<int, int> decode_212_frame(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2) {
  const int a = b0 | ((b1 & 0x0F) << 8);
  const int b = b2 | ((b1 & 0xF0) << 4);
  return {sign_extend12(a), sign_extend12(b)};
}

std::array<std::uint8_t, 3> encode_212_frame(int a, int b) {
  check_raw(a);
  check_raw(b);
  const unsigned ua = static_cast<unsigned>(a) & 0xFFF;
  const unsigned ub = static_cast<unsigned>(b) & 0xFFF;
  return {static_cast<std::uint8_t>(ua & 0xFF),
          static_cast<std::uint8_t>(((ua >> 8) & 0x0F) | ((ub >> 4) & 0xF0)),
          static_cast<std::uint8_t>(ub & 0xFF)};
}

std::vector<RawSignal> parse_wfdb212(std::span<const std::uint8_t> bytes, const Wfdb212Layout& layout) {
  const int nch = layout.n_channels;
  if (nch != 1 && nch != 2) fail(ErrorKind::Validation, "212: n_channels must be 1 or 2");
  if (layout.gains.size() < static_cast<std::size_t>(nch) ||
      layout.baselines.size() < static_cast<std::size_t>(nch))
    fail(ErrorKind::Validation, "212: need one gain and one baseline per channel");
  for (int c = 0; c < nch; ++c) {
    if (!(layout.gains[c] > 0.0) || !std::isfinite(layout.gains[c]))
      fail(ErrorKind::Validation, "212: gains must be positive");
  }
  if (!(layout.sampling_rate_hz > 0.0)) fail(ErrorKind::Validation, "212: sampling rate must be positive");
  if (bytes.size() % 3 != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % 3;
    fail(ErrorKind::Parse, "212: truncated frame at byte offset " + std::to_string(offset));
  }
  if (bytes.empty()) fail(ErrorKind::Parse, "212: empty byte stream");

  std::vector<RawSignal> out(nch);
  for (int c = 0; c < nch; ++c) {
    out[c].sampling_rate_hz = layout.sampling_rate_hz;
    out[c].channel_id = c;
    out[c].source_name = layout.source_name;
    out[c].samples.reserve(bytes.size() / 3 * 2 / nch);
  }
  // Samples are interleaved channel by channel; each frame carries two.
  std::size_t k = 0;
  auto push = [&](int raw) {
    const int c = static_cast<int>(k % nch);
    out[c].samples.push_back((raw - layout.baselines[c]) / layout.gains[c]);
    ++k;
  };
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    auto [a, b] = decode_212_frame(bytes[i], bytes[i + 1], bytes[i + 2]);
    push(a);
    push(b);
  }
  return out;
}

std::vector<std::uint8_t> encode_wfdb212(const std::vector<std::vector<int>>& channels) {
  if (channels.empty() || channels.size() > 2) fail(ErrorKind::Validation, "212: need 1 or 2 channels");
  const std::size_t n = channels[0].size();
  for (const auto& ch : channels) {
    if (ch.size() != n) fail(ErrorKind::Validation, "212: channels differ in length");
  }
  std::vector<int> interleaved;
  interleaved.reserve(n * channels.size() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& ch : channels) interleaved.push_back(ch[i]);
  }
  if (interleaved.size() % 2) interleaved.push_back(0);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(interleaved.size() / 2 * 3);
  for (std::size_t i = 0; i < interleaved.size(); i += 2) {
    auto f = encode_212_frame(interleaved[i], interleaved[i + 1]);
    bytes.insert(bytes.end(), f.begin(), f.end());
  }
  return bytes;
}

}  // namespace uird::ingest

#include <charconv>
#include <sstream>

#include "uird/error.hpp"
#include "uird/ingest.hpp"
#include "uird/io.hpp"

namespace uird::ingest {
namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename F>
void for_each_line(const std::string& text, F&& f) {
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    f(std::string_view(text).substr(start, end - start), line_no);
    start = end + 1;
  }
}

[[noreturn]] void line_error(const std::string& what, std::size_t line_no, const std::string& msg) {
  fail(ErrorKind::Parse, what + " line " + std::to_string(line_no) + ": " + msg);
}

}  // namespace

std::vector<Annotation> parse_annotations(const std::string& text) {
  std::vector<Annotation> out;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') return;
    auto fields = split_commas(line);
    if (fields.size() != 2) line_error("annotations", line_no, "expected sample_index,symbol");
    const std::string_view idx = trim(fields[0]);
    const std::string_view sym = trim(fields[1]);
    std::size_t index = 0;
    auto res = std::from_chars(idx.data(), idx.data() + idx.size(), index);
    if (idx.empty() || res.ec != std::errc() || res.ptr != idx.data() + idx.size())
      line_error("annotations", line_no, "bad sample index '" + std::string(idx) + "'");
    if (sym.size() != 1) line_error("annotations", line_no, "symbol must be one character");
    out.push_back({index, sym[0]});
  });
  return out;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path));
}

BeatSet parse_beatset_csv(const std::string& text, const std::string& alphabet, std::size_t length) {
  BeatSet out;
  for_each_line(text, [&](std::string_view raw, std::size_t line_no) {
    const std::string_view line = trim(raw);
    if (line.empty()) return;
    auto fields = split_commas(line);
    bool synthetic = false;
    if (fields.size() == length + 2 && trim(fields.back()).starts_with("synthetic=")) {
      const std::string_view tag = trim(fields.back());
      if (tag == "synthetic=1") synthetic = true;
      else if (tag != "synthetic=0") line_error("beatset", line_no, "bad trailing field '" + std::string(tag) + "'");
      fields.pop_back();
    }
    if (fields.size() != length + 1)
      line_error("beatset", line_no,
                 "expected label and " + std::to_string(length) + " values, got " + std::to_string(fields.size() - 1));
    const std::string_view label = trim(fields[0]);
    if (label.size() != 1) line_error("beatset", line_no, "label must be one character");
    if (!alphabet.empty() && !in_alphabet(alphabet, label[0]))
      line_error("beatset", line_no, "unknown label '" + std::string(label) + "'");
    Beat beat;
    beat.label = label[0];
    beat.synthetic = synthetic;
    beat.values.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
      if (!parse_double(fields[i + 1], beat.values[i]))
        line_error("beatset", line_no, "non-numeric value in field " + std::to_string(i + 2));
    }
    out.push_back(std::move(beat));
  });
  return out;
}

BeatSet load_beatset_csv(const std::filesystem::path& path, const std::string& alphabet, std::size_t length) {
  return parse_beatset_csv(read_file(path), alphabet, length);
}

std::string format_beatset_csv(const BeatSet& beats, bool with_synthetic_column) {
  std::string out;
  for (const Beat& b : beats) {
    out += b.label;
    for (double v : b.values) {
      out += ',';
      out += format_double(v);
    }
    if (with_synthetic_column) out += b.synthetic ? ",synthetic=1" : ",synthetic=0";
    out += '\n';
  }
  return out;
}

void save_beatset_csv(const std::filesystem::path& path, const BeatSet& beats, bool with_synthetic_column) {
  write_file(path, format_beatset_csv(beats, with_synthetic_column));
}

}  // namespace uird::ingest

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace uird {

std::string read_file(const std::filesystem::path& path);
// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view contents);

// Git blob object id (SHA-1 over "blob <size>\0" + contents), lowercase hex.
std::string content_hash(std::string_view contents);

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
// Strict parse: the whole field must be a finite number.
bool parse_double(std::string_view text, double& out);

}  // namespace uird

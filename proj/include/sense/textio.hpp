#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sense {

/// Scientific notation with 9 significant digits ("%.8e").
std::string format_real(double x);

/// Space-joined format_real of every element.
std::string format_reals(std::span<const double> xs);

/// Parses a real; throws IoError mentioning `context` on failure.
double parse_real(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);

std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_ws(std::string_view s);
std::string_view trim(std::string_view s);

/// Reads all lines; strips a trailing '\r'. Throws IoError.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

void ensure_directory(const std::filesystem::path& dir);

}  // namespace sense

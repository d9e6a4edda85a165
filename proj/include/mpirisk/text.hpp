#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mpirisk {

/// Shortest decimal that round-trips to the same double. NaN -> "".
std::string format_double(double value);

/// Full-string parse ignoring surrounding blanks; false on empty input or trailing garbage.
bool parse_double(std::string_view text, double& out);

std::vector<std::string_view> split(std::string_view line, char sep);

/// Splits text into lines, dropping a trailing '\r' on each and a final empty line.
std::vector<std::string_view> split_lines(std::string_view text);

std::string read_file(const std::string& path);

/// Writes through a temp file in the same directory and renames over `path`.
/// The temp file is removed if anything fails.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace mpirisk

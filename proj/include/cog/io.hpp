#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cog::io {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split_fields(std::string_view line, std::string_view separators);

/// Parses a full token as an integer / real; throws ParseError with the line context.
long long parse_int(std::string_view token, const std::string& path, std::size_t line);
double parse_real(std::string_view token, const std::string& path, std::size_t line);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace cog::io

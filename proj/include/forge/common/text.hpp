#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
bool is_blank(std::string_view s);

/// Collapses runs of ASCII whitespace into one space and trims the ends.
std::string normalize_whitespace(std::string_view s);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s);

/// Longest prefix holding at most `n` code points.
std::string utf8_prefix(std::string_view s, std::size_t n);

bool contains(std::string_view haystack, std::string_view needle);
bool starts_with_ci(std::string_view s, std::string_view prefix);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace forge

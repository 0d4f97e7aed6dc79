#pragma once

#include <string>
#include <string_view>

namespace forge {

/// Lowercase hex SHA-256 of `data`; always 64 characters.
std::string sha256_hex(std::string_view data);

inline constexpr std::size_t kDigestHexLength = 64;

bool is_hex_digest(std::string_view s);

} // namespace forge

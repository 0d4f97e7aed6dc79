#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace forge {

using json = nlohmann::json;

/// Calls `fn(line_number, record)` for every non-blank line. JSON syntax
/// errors become ParseError with the 1-based line number; exceptions thrown
/// by `fn` that are not forge errors are wrapped the same way.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(std::size_t, const json&)>& fn);

std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Writes one compact record per line; returns the number written.
std::size_t write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

/// Atomic replace: write to a sibling temp file then rename over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// SHA-256 of a file's bytes.
std::string file_digest(const std::filesystem::path& path);

} // namespace forge

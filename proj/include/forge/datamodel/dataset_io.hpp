#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "forge/datamodel/types.hpp"

namespace forge {

/// Reads a line-delimited dataset. Malformed lines raise ParseError with the
/// line number; invariant violations and duplicate ids raise ValidationError
/// with the sample id.
std::vector<DialogueSample> read_dataset(const std::filesystem::path& path);

/// Validates every sample, then writes one canonical record per line.
/// Returns the number written.
std::size_t write_dataset(std::span<const DialogueSample> samples, const std::filesystem::path& path);

/// Canonical single-line form of one sample (no trailing newline).
std::string canonical_record(const DialogueSample& sample);

} // namespace forge

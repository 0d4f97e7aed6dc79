#pragma once

// Line-oriented text contracts shared by prompts and LLM replies.
//
// Replies use role- or field-tagged lines closed by a sentinel:
//
//     [patient] I have had a cough for a week.
//     [doctor] How high has your temperature been?
//     [END]
//
// Prompts embed their structured inputs in named blocks:
//
//     <<<dialogue
//     ...
//     >>>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

inline constexpr std::string_view kEndSentinel = "[END]";

struct TaggedLine {
    std::string tag;
    std::string text;

    bool operator==(const TaggedLine&) const = default;
};

/// Renders one `[tag] text` line per entry, plus the sentinel when requested.
std::string render_tagged(std::span<const TaggedLine> lines, bool terminate = true);

/// Parses tagged lines. Text before the first recognised tag is ignored;
/// untagged lines continue the previous entry. With `require_terminator`
/// the sentinel must be present and everything after it is ignored.
/// Returns nullopt on a missing sentinel, no entries, or an empty entry.
std::optional<std::vector<TaggedLine>> parse_tagged(std::string_view text,
                                                    std::span<const std::string_view> allowed_tags,
                                                    bool require_terminator = true);

std::string render_input_block(std::string_view name, std::string_view body);
std::optional<std::string> extract_input_block(std::string_view text, std::string_view name);

} // namespace forge

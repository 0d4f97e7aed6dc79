#include "forge/common/tagged_text.hpp"

#include <algorithm>

#include "forge/common/text.hpp"

namespace forge {

std::string render_tagged(std::span<const TaggedLine> lines, bool terminate) {
    std::string out;
    for (const auto& l : lines) {
        out += '[';
        out += l.tag;
        out += "] ";
        out += l.text;
        out += '\n';
    }
    if (terminate) {
        out += kEndSentinel;
        out += '\n';
    }
    return out;
}

namespace {

// "[tag] rest" with tag in the allowed set; returns the tag and remainder.
std::optional<std::pair<std::string, std::string>> match_tag(std::string_view line,
                                                             std::span<const std::string_view> allowed) {
    line = trim_view(line);
    if (line.size() < 2 || line.front() != '[') return std::nullopt;
    auto close = line.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    std::string tag(line.substr(1, close - 1));
    std::transform(tag.begin(), tag.end(), tag.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(allowed.begin(), allowed.end(), tag) == allowed.end()) return std::nullopt;
    return std::pair{tag, trim(line.substr(close + 1))};
}

} // namespace

std::optional<std::vector<TaggedLine>> parse_tagged(std::string_view text,
                                                    std::span<const std::string_view> allowed_tags,
                                                    bool require_terminator) {
    std::vector<TaggedLine> out;
    bool terminated = false;
    for (const auto& raw : split_lines(text)) {
        if (trim_view(raw) == kEndSentinel) {
            terminated = true;
            break;
        }
        if (auto m = match_tag(raw, allowed_tags)) {
            out.push_back({std::move(m->first), std::move(m->second)});
        } else if (!out.empty() && !is_blank(raw)) {
            auto& cur = out.back().text;
            if (!cur.empty()) cur += '\n';
            cur += trim(raw);
        }
    }
    if (require_terminator && !terminated) return std::nullopt;
    if (out.empty()) return std::nullopt;
    for (const auto& l : out)
        if (is_blank(l.text)) return std::nullopt;
    return out;
}

std::string render_input_block(std::string_view name, std::string_view body) {
    std::string out = "<<<";
    out += name;
    out += '\n';
    out += body;
    if (!body.empty() && body.back() != '\n') out += '\n';
    out += ">>>\n";
    return out;
}

std::optional<std::string> extract_input_block(std::string_view text, std::string_view name) {
    std::string open = "<<<" + std::string(name) + "\n";
    auto start = text.find(open);
    if (start == std::string_view::npos) return std::nullopt;
    start += open.size();
    auto end = text.find("\n>>>", start - 1);
    if (end == std::string_view::npos) return std::nullopt;
    if (end < start) return std::string{};
    return std::string(text.substr(start, end - start));
}

} // namespace forge

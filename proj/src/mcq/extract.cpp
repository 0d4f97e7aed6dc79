#include <regex>

#include "forge/mcq/mcq.hpp"

namespace forge::mcq {

namespace {

// Every pattern captures the letter in group 1.
const std::vector<std::regex>& answer_patterns() {
    static const std::vector<std::regex> patterns = [] {
        const std::string open = R"((?:\(|（|\[)?)";
        const std::string letter = R"(([A-Z])(?![A-Za-z]))";
        const std::string colon = R"((?::|：)?)";
        std::vector<std::string> sources{
            R"((?:[Aa]nswer|ANSWER)s?(?:\s+is)?\s*)" + colon + R"(\s*(?:[Oo]ption\s+)?)" + open + letter,
            R"(答案(?:\s*(?:是|为|应为|应该是|选|:|：))*\s*)" + open + letter,
            R"((?:选择|选)\s*)" + open + letter,
            R"((?:[Cc]orrect|[Bb]est|[Rr]ight)\s+(?:option|choice|answer)\s*(?:is\s*)?)" + colon + R"(\s*)" + open + letter,
            R"((?:[Oo]ption|[Cc]hoice)\s+)" + open + R"(([A-Z])(?:\)|）)?\s+is\s+(?:the\s+)?(?:correct|right|best))",
            R"(^\s*)" + open + R"(([A-Z])(?:\)|）|\.|。|、)?\s*$)",
            R"(^\s*)" + open + R"(([A-Z])(?:\)|）|\.|。|、|:|：))",
        };
        std::vector<std::regex> out;
        for (const auto& s : sources) out.emplace_back(s, std::regex::ECMAScript | std::regex::optimize);
        return out;
    }();
    return patterns;
}

} // namespace

std::optional<std::string> extract_answer(const std::string& response,
                                          const std::map<std::string, std::string>& options) {
    std::optional<std::string> best;
    auto best_pos = std::string::npos;
    for (const auto& re : answer_patterns()) {
        for (auto it = std::sregex_iterator(response.begin(), response.end(), re); it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            const auto letter = m[1].str();
            const auto pos = static_cast<std::size_t>(m.position(1));
            if (!options.contains(letter)) continue;
            if (pos < best_pos) {
                best_pos = pos;
                best = letter;
            }
            break;
        }
    }
    if (best) return best;

    // An option text quoted verbatim. Texts contained in another quoted
    // option's text do not count on their own.
    std::vector<std::pair<std::string, std::string>> quoted;
    for (const auto& [letter, text] : options)
        if (!text.empty() && response.find(text) != std::string::npos) quoted.emplace_back(letter, text);
    std::vector<std::string> maximal;
    for (const auto& [letter, text] : quoted) {
        bool inside_other = false;
        for (const auto& [other_letter, other] : quoted)
            if (other_letter != letter && other.size() > text.size() && other.find(text) != std::string::npos)
                inside_other = true;
        if (!inside_other) maximal.push_back(letter);
    }
    if (maximal.size() == 1) return maximal.front();
    return std::nullopt;
}

} // namespace forge::mcq

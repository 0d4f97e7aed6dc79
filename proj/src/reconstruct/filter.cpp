#include <algorithm>
#include <regex>
#include <set>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/text.hpp"
#include "forge/reconstruct/reconstruct.hpp"

namespace forge::reconstruct {

using nlohmann::json;

namespace {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string record_text(const RawRecord& r) {
    std::string out;
    for (const auto& t : r.turns) {
        out += t.text;
        out += '\n';
    }
    return out;
}

} // namespace

std::string_view to_string(FilterKind k) {
    switch (k) {
    case FilterKind::keyword_block: return "keyword_block";
    case FilterKind::keyword_require: return "keyword_require";
    case FilterKind::min_turns: return "min_turns";
    case FilterKind::max_turns: return "max_turns";
    case FilterKind::entity_require: return "entity_require";
    }
    return "?";
}

FilterKind parse_filter_kind(std::string_view s) {
    for (auto k : {FilterKind::keyword_block, FilterKind::keyword_require, FilterKind::min_turns, FilterKind::max_turns,
                   FilterKind::entity_require})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown filter kind '" + std::string(s) + "'");
}

struct GazetteerEntityDetector::Compiled {
    std::vector<std::pair<std::string, std::regex>> patterns;
};

GazetteerEntityDetector::GazetteerEntityDetector(std::map<std::string, std::vector<std::string>> terms,
                                                 std::map<std::string, std::vector<std::string>> patterns)
    : terms_(std::move(terms)) {
    auto compiled = std::make_shared<Compiled>();
    for (const auto& [type, list] : patterns) {
        for (const auto& p : list) {
            try {
                compiled->patterns.emplace_back(type, std::regex(p, std::regex::ECMAScript | std::regex::icase));
            } catch (const std::regex_error& e) {
                throw ConfigError("bad entity pattern '" + p + "': " + e.what());
            }
        }
    }
    compiled_ = std::move(compiled);
}

GazetteerEntityDetector GazetteerEntityDetector::from_json(const json& j) {
    try {
        return GazetteerEntityDetector(j.value("terms", std::map<std::string, std::vector<std::string>>{}),
                                       j.value("patterns", std::map<std::string, std::vector<std::string>>{}));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed gazetteer: ") + e.what());
    }
}

GazetteerEntityDetector GazetteerEntityDetector::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

std::vector<Entity> GazetteerEntityDetector::detect(std::string_view text) const {
    std::vector<Entity> out;
    const auto lowered = ascii_lower(text);
    for (const auto& [type, list] : terms_)
        for (const auto& term : list)
            if (!term.empty() && lowered.find(ascii_lower(term)) != std::string::npos) out.push_back({term, type});
    const std::string owned(text);
    for (const auto& [type, re] : compiled_->patterns)
        for (auto it = std::sregex_iterator(owned.begin(), owned.end(), re); it != std::sregex_iterator(); ++it)
            out.push_back({it->str(), type});
    return out;
}

void validate_rules(const std::vector<FilterRule>& rules, bool have_detector) {
    std::set<std::string> ids;
    for (const auto& r : rules) {
        if (r.id.empty()) throw ConfigError("filter rule without an id");
        if (!ids.insert(r.id).second) throw ConfigError("duplicate filter rule id '" + r.id + "'");
        switch (r.kind) {
        case FilterKind::keyword_block:
        case FilterKind::keyword_require:
        case FilterKind::entity_require:
            if (r.terms.empty() || std::any_of(r.terms.begin(), r.terms.end(), [](const auto& t) { return t.empty(); }))
                throw ConfigError("filter rule '" + r.id + "' needs a non-empty term list");
            if (r.kind == FilterKind::entity_require && !have_detector)
                throw ConfigError("filter rule '" + r.id + "' needs an entity detector");
            break;
        case FilterKind::min_turns:
        case FilterKind::max_turns:
            break;
        }
    }
}

std::vector<FilterRule> filter_rules_from_json(const json& j) {
    const json& list = j.is_object() ? j.at("rules") : j;
    std::vector<FilterRule> out;
    try {
        for (const auto& e : list) {
            FilterRule r;
            r.id = e.at("id").get<std::string>();
            r.kind = parse_filter_kind(e.at("kind").get<std::string>());
            if (r.kind == FilterKind::min_turns || r.kind == FilterKind::max_turns)
                r.bound = e.at("value").get<std::size_t>();
            else if (r.kind == FilterKind::entity_require)
                r.terms = e.at("entity_types").get<std::vector<std::string>>();
            else
                r.terms = e.at("keywords").get<std::vector<std::string>>();
            out.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed filter rules: ") + e.what());
    }
    return out;
}

std::vector<FilterRule> load_filter_rules(const std::filesystem::path& path) {
    return filter_rules_from_json(read_json_file(path));
}

FilterOutcome filter_records(const std::vector<RawRecord>& records, const std::vector<FilterRule>& rules,
                             const EntityDetector* detector) {
    validate_rules(rules, detector != nullptr);
    std::vector<std::vector<std::string>> lowered_terms;
    for (const auto& r : rules) {
        std::vector<std::string> t;
        for (const auto& term : r.terms) t.push_back(ascii_lower(term));
        lowered_terms.push_back(std::move(t));
    }

    FilterOutcome out;
    for (const auto& rec : records) {
        const auto text = record_text(rec);
        const auto lowered = ascii_lower(text);
        std::optional<Rejection> rejection;
        for (std::size_t i = 0; i < rules.size() && !rejection; ++i) {
            const auto& rule = rules[i];
            const auto& terms = lowered_terms[i];
            auto hit = [&]() -> const std::string* {
                for (const auto& t : terms)
                    if (lowered.find(t) != std::string::npos) return &t;
                return nullptr;
            };
            switch (rule.kind) {
            case FilterKind::keyword_block:
                if (auto t = hit()) rejection = Rejection{rec, rule.id, "blocked keyword '" + *t + "'"};
                break;
            case FilterKind::keyword_require:
                if (!hit()) rejection = Rejection{rec, rule.id, "no required keyword"};
                break;
            case FilterKind::min_turns:
                if (rec.turns.size() < rule.bound)
                    rejection = Rejection{rec, rule.id, std::to_string(rec.turns.size()) + " turns, fewer than " +
                                                            std::to_string(rule.bound)};
                break;
            case FilterKind::max_turns:
                if (rec.turns.size() > rule.bound)
                    rejection = Rejection{rec, rule.id, std::to_string(rec.turns.size()) + " turns, more than " +
                                                            std::to_string(rule.bound)};
                break;
            case FilterKind::entity_require: {
                try {
                    auto entities = detector->detect(text);
                    bool found = std::any_of(entities.begin(), entities.end(), [&](const Entity& e) {
                        return std::find(rule.terms.begin(), rule.terms.end(), e.type) != rule.terms.end();
                    });
                    if (!found) rejection = Rejection{rec, rule.id, "no entity of a required type"};
                } catch (const std::exception& e) {
                    rejection = Rejection{rec, rule.id, std::string("entity detector failed: ") + e.what()};
                }
                break;
            }
            }
        }
        if (rejection)
            out.rejected.push_back(std::move(*rejection));
        else
            out.kept.push_back(rec);
    }
    return out;
}

} // namespace forge::reconstruct

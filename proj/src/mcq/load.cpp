#include <cctype>
#include <set>

#include "forge/common/jsonl.hpp"
#include "forge/common/text.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/mcq/mcq.hpp"

namespace forge::mcq {

namespace {

// "a", "A.", "(B)", "C)" -> "A", "B", "C"; anything else unchanged.
std::string normalize_letter(std::string_view raw) {
    auto s = trim(raw);
    std::string core;
    for (char c : s)
        if (!(c == '(' || c == ')' || c == '.' || c == ':' || c == ' ')) core += c;
    if (core.size() == 1 && std::isalpha(static_cast<unsigned char>(core[0])))
        return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(core[0]))));
    return s;
}

std::string id_of(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    throw Error("id must be a string or an integer");
}

// Drops an "A. " / "A、" prefix that repeats the expected letter.
std::string strip_letter_prefix(const std::string& text, char letter) {
    auto t = trim(text);
    if (t.size() >= 2 && t[0] == letter && (t[1] == '.' || t[1] == ')' || t[1] == ':')) return trim(t.substr(2));
    if (t.size() >= 4 && t[0] == letter && t.compare(1, 3, "、") == 0) return trim(t.substr(4));
    return t;
}

} // namespace

McqItem normalize_record(const json& record, McqSubset fallback_subset) {
    if (!record.is_object()) throw Error("record is not an object");
    McqItem m;
    if (!record.contains("id")) throw Error("missing id");
    m.id = id_of(record.at("id"));
    m.subset = fallback_subset;
    if (auto it = record.find("subset"); it != record.end() && it->is_string())
        m.subset = parse_mcq_subset(it->get<std::string>());
    if (!record.contains("question")) throw Error("missing question");
    m.question = record.at("question").get<std::string>();

    if (auto it = record.find("options"); it != record.end()) {
        if (it->is_object()) {
            for (const auto& [k, v] : it->items()) m.options[normalize_letter(k)] = trim(v.get<std::string>());
        } else if (it->is_array()) {
            char letter = 'A';
            for (const auto& v : *it) {
                m.options[std::string(1, letter)] = strip_letter_prefix(v.get<std::string>(), letter);
                ++letter;
            }
        } else {
            throw Error("options must be an object or a list");
        }
    } else {
        char letter = 'A';
        for (const char* key : {"opa", "opb", "opc", "opd", "ope"}) {
            if (!record.contains(key)) break;
            m.options[std::string(1, letter++)] = trim(record.at(key).get<std::string>());
        }
        if (m.options.empty()) throw Error("missing options");
    }

    auto letter_at = [](long long idx) { return std::string(1, static_cast<char>('A' + idx)); };
    if (auto it = record.find("gold"); it != record.end()) {
        m.gold = normalize_letter(it->get<std::string>());
    } else if (auto ans = record.find("answer"); ans != record.end()) {
        if (ans->is_number_integer())
            m.gold = letter_at(ans->get<long long>());
        else
            m.gold = normalize_letter(ans->get<std::string>());
    } else if (auto idx = record.find("answer_idx"); idx != record.end()) {
        m.gold = idx->is_number_integer() ? letter_at(idx->get<long long>()) : normalize_letter(idx->get<std::string>());
    } else if (auto cop = record.find("cop"); cop != record.end()) {
        m.gold = letter_at(cop->get<long long>() - 1);
    } else {
        throw Error("missing gold answer");
    }
    if (!m.options.contains(m.gold)) {
        // Some sources store the answer text instead of its letter.
        for (const auto& [letter, text] : m.options)
            if (text == trim(m.gold)) m.gold = letter;
    }

    for (const char* key : {"explanation", "exp"}) {
        auto it = record.find(key);
        if (it != record.end() && it->is_string() && !is_blank(it->get<std::string>())) {
            m.explanation = it->get<std::string>();
            break;
        }
    }
    return m;
}

LoadedSet load_mcq(const std::filesystem::path& path, std::optional<McqSubset> subset) {
    LoadedSet out;
    std::set<std::string> seen;
    for_each_jsonl(path, [&](std::size_t line, const json& record) {
        McqItem item;
        try {
            if (!subset && !(record.is_object() && record.contains("subset"))) throw Error("missing subset");
            item = normalize_record(record, subset.value_or(McqSubset::mlec_clinic));
        } catch (const std::exception& e) {
            std::string id = record.is_object() && record.contains("id") ? record.at("id").dump() : "";
            out.rejected.push_back({line, id, {e.what()}});
            return;
        }
        if (subset) item.subset = *subset;
        auto problems = mcq_item_problems(item);
        if (!seen.insert(item.id).second) problems.push_back("duplicate id");
        if (!problems.empty()) {
            out.rejected.push_back({line, item.id, std::move(problems)});
            return;
        }
        out.items.push_back(std::move(item));
    });
    return out;
}

void write_benchmark(const Benchmark& b, const std::filesystem::path& path) {
    std::vector<json> records;
    records.reserve(b.items.size());
    for (const auto& item : b.items) records.push_back(item);
    write_jsonl(path, records);
}

Benchmark read_benchmark(const std::filesystem::path& path) {
    auto loaded = load_mcq(path);
    if (!loaded.rejected.empty()) {
        const auto& r = loaded.rejected.front();
        throw ParseError(r.line, "benchmark item " + r.id + ": " + join(r.reasons, "; "));
    }
    Benchmark b;
    for (const auto& item : loaded.items) ++b.counts[item.subset];
    b.items = std::move(loaded.items);
    return b;
}

} // namespace forge::mcq

#include <algorithm>
#include <set>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/text.hpp"
#include "forge/reconstruct/reconstruct.hpp"

namespace forge::reconstruct {

using nlohmann::json;

json to_json(const RawRecord& r) {
    json turns = json::array();
    for (const auto& t : r.turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
    json j{{"id", r.id}, {"source", to_string(r.source)}, {"turns", turns}};
    if (r.department_path.size() == 1)
        j["department"] = r.department_path.front();
    else if (!r.department_path.empty())
        j["department"] = r.department_path;
    return j;
}

RawRecord raw_record_from_json(const json& j) {
    RawRecord r;
    r.id = j.at("id").get<std::string>();
    if (r.id.empty()) throw Error("raw record without an id");
    r.source = parse_source(j.at("source").get<std::string>());
    if (r.source != Source::meddialog && r.source != Source::cmedqa2)
        throw Error("raw record '" + r.id + "' has non-forum source '" + std::string(to_string(r.source)) + "'");
    if (auto it = j.find("department"); it != j.end() && !it->is_null()) {
        if (it->is_string())
            r.department_path.push_back(it->get<std::string>());
        else
            r.department_path = it->get<std::vector<std::string>>();
        if (r.department_path.size() == 1) r.department = r.department_path.front();
    }
    for (const auto& t : j.at("turns")) r.turns.push_back({t.at("speaker").get<std::string>(), t.at("text").get<std::string>()});
    if (r.turns.empty()) throw Error("raw record '" + r.id + "' has no turns");
    return r;
}

std::vector<RawRecord> read_raw_records(const std::filesystem::path& path) {
    std::vector<RawRecord> out;
    for_each_jsonl(path, [&](std::size_t, const json& j) { out.push_back(raw_record_from_json(j)); });
    return out;
}

void resolve_departments(std::vector<RawRecord>& records, const DepartmentTaxonomy& taxonomy) {
    std::set<std::string> bad;
    for (auto& r : records) {
        if (r.department_path.empty()) {
            r.department.reset();
            continue;
        }
        if (auto leaf = taxonomy.resolve(r.department_path))
            r.department = *leaf;
        else
            bad.insert(join(r.department_path, "/"));
    }
    if (!bad.empty()) throw IngestError("unresolvable department labels", std::vector<std::string>(bad.begin(), bad.end()));
}

std::optional<Role> speaker_role(std::string_view speaker) {
    auto s = trim(speaker);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "patient" || s == "user" || s == "病人" || s == "患者") return Role::patient;
    if (s == "doctor" || s == "assistant" || s == "医生" || s == "大夫") return Role::doctor;
    return std::nullopt;
}

std::vector<Turn> normalize_turns(const RawRecord& record) {
    std::vector<Turn> out;
    for (const auto& t : record.turns) {
        auto role = speaker_role(t.speaker);
        if (!role) return {};
        if (is_blank(t.text)) continue;
        if (out.empty() && *role == Role::doctor) continue;
        if (!out.empty() && out.back().role == *role)
            out.back().content += "\n" + t.text;
        else
            out.push_back({*role, t.text, {}});
    }
    if (!out.empty() && out.back().role == Role::patient) out.pop_back();
    return out;
}

std::optional<DialogueSample> raw_as_sample(const RawRecord& record, StageTag stage) {
    auto turns = normalize_turns(record);
    if (turns.empty()) return std::nullopt;
    DialogueSample s;
    s.id = std::string(to_string(record.source)) + "-" + record.id;
    s.source = record.source;
    s.department = record.department;
    s.turns = std::move(turns);
    s.stage_tag = stage;
    s.provenance.origin_record_id = record.id;
    return s;
}

} // namespace forge::reconstruct

#include "forge/datamodel/validate.hpp"

#include "forge/common/digest.hpp"
#include "forge/common/error.hpp"
#include "forge/common/text.hpp"

namespace forge {

std::string Violation::describe() const {
    std::string out = invariant;
    if (turn_index) out += " at turn " + std::to_string(*turn_index);
    if (!detail.empty()) out += ": " + detail;
    return out;
}

std::vector<Violation> validate_sample(const DialogueSample& s) {
    std::vector<Violation> out;
    if (s.id.empty()) out.push_back({"id_nonempty", std::nullopt, "sample id is empty"});
    if (s.turns.empty()) {
        out.push_back({"turns_nonempty", std::nullopt, "sample has no turns"});
    } else {
        const std::size_t first = s.turns.front().role == Role::system ? 1 : 0;
        if (first == 1 && s.turns.size() == 1)
            out.push_back({"final_role", 0, "only a system turn"});
        for (std::size_t i = 0; i < s.turns.size(); ++i) {
            const auto& t = s.turns[i];
            if (is_blank(t.content)) out.push_back({"content_nonempty", i, "turn content is blank"});
            if (i < first) continue;
            const Role expected = (i - first) % 2 == 0 ? Role::patient : Role::doctor;
            if (t.role != expected)
                out.push_back({"role_alternation", i,
                               "expected " + std::string(to_string(expected)) + ", found " +
                                   std::string(to_string(t.role))});
        }
        if (s.turns.size() > first && s.turns.back().role != Role::doctor)
            out.push_back({"final_role", s.turns.size() - 1, "last turn must be the doctor's"});
    }

    const auto& steps = s.provenance.pipeline_steps;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i > 0 && steps[i].timestamp_ms < steps[i - 1].timestamp_ms)
            out.push_back({"provenance_timestamps", std::nullopt,
                           "step " + std::to_string(i) + " is earlier than its predecessor"});
        if (!is_hex_digest(steps[i].prompt_hash) || !is_hex_digest(steps[i].response_hash))
            out.push_back({"provenance_hash", std::nullopt,
                           "step " + std::to_string(i) + " carries a malformed digest"});
    }
    return out;
}

void require_valid(const DialogueSample& sample) {
    auto v = validate_sample(sample);
    if (v.empty()) return;
    std::vector<std::string> text;
    for (const auto& x : v) text.push_back(x.describe());
    throw ValidationError(sample.id, std::move(text));
}

} // namespace forge

#include <variant>

#include "forge/common/digest.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/gateway/structured.hpp"
#include "forge/reconstruct/reconstruct.hpp"

namespace forge::reconstruct {

using gateway::ChatMessage;
using gateway::ChatRequest;
using gateway::MessageRole;
using nlohmann::json;

namespace {

constexpr std::string_view kDialogueTags[] = {"patient", "doctor"};

const char* const kSystemPrompt =
    "You edit medical consultation transcripts into training material for an AI doctor. "
    "You change only what the doctor says.";

const char* const kFormatInstruction =
    "Reply with the full dialogue, one turn per line. Start each line with [patient] or [doctor], "
    "copy the patient lines unchanged, keep the turns in their original order, and finish with a "
    "line that contains only [END].";

std::string render_dialogue(const std::vector<Turn>& turns) {
    std::vector<TaggedLine> lines;
    for (const auto& t : turns) lines.push_back({std::string(to_string(t.role)), t.content});
    return render_tagged(lines, false);
}

std::size_t count_role(const std::vector<Turn>& turns, Role r) {
    std::size_t n = 0;
    for (const auto& t : turns) n += t.role == r;
    return n;
}

// Doctor texts from a reply, or a description of what is wrong with it.
std::variant<std::vector<std::string>, std::string> read_reply(const std::string& reply, std::size_t patient_turns) {
    auto lines = parse_tagged(reply, kDialogueTags);
    if (!lines) return std::string("the reply is not a tagged dialogue closed by [END]");
    if (lines->size() != 2 * patient_turns)
        return "expected " + std::to_string(2 * patient_turns) + " turns, got " + std::to_string(lines->size());
    std::vector<std::string> doctor;
    for (std::size_t i = 0; i < lines->size(); ++i) {
        const auto& want = i % 2 == 0 ? "patient" : "doctor";
        if ((*lines)[i].tag != want) return "turn " + std::to_string(i + 1) + " should be a " + want + " turn";
        if (i % 2 == 1) doctor.push_back((*lines)[i].text);
    }
    return doctor;
}

} // namespace

const std::vector<std::string>& rewrite_rules() {
    static const std::vector<std::string> rules{
        "Use clear, professional wording in every doctor turn: drop slang, filler and chatty asides, and keep "
        "terms and tone consistent from one turn to the next.",
        "Keep all the medical substance of each original doctor turn, including findings, drug names, doses and "
        "advice, and do not introduce clinical claims that were not there.",
        "Where the doctor says or offers something an AI doctor cannot do, such as booking a visit, examining "
        "the patient, prescribing in person or moving the chat to a private channel, rewrite that part as "
        "suitable advice or leave it out.",
    };
    return rules;
}

ChatRequest build_rewrite_prompt(const RawRecord& record, const std::string& backend_id) {
    auto turns = normalize_turns(record);
    std::string user = "Rewrite the doctor turns of the consultation below.\n\nRules:\n";
    const auto& rules = rewrite_rules();
    for (std::size_t i = 0; i < rules.size(); ++i) user += std::to_string(i + 1) + ". " + rules[i] + "\n";
    user += "\n" + render_input_block("dialogue", render_dialogue(turns)) + "\n" + kFormatInstruction + "\n";

    ChatRequest req;
    req.backend_id = backend_id;
    req.messages = {{MessageRole::system, kSystemPrompt}, {MessageRole::user, std::move(user)}};
    req.temperature = gateway::temperature::kDeterministic;
    req.request_tag = std::string(gateway::tags::kReconstruct);
    return req;
}

json to_json(const QuarantineEntry& q) {
    return json{{"record_id", q.record_id}, {"reason", q.reason}, {"raw_response", q.raw_response}, {"attempts", q.attempts}};
}

void write_quarantine(const std::vector<QuarantineEntry>& entries, const std::filesystem::path& path) {
    std::vector<json> rows;
    for (const auto& q : entries) rows.push_back(to_json(q));
    write_jsonl(path, rows);
}

ReconstructResult reconstruct(const RawRecord& record, gateway::Gateway& gw, const ReconstructOptions& options) {
    const auto turns = normalize_turns(record);
    if (turns.empty())
        return {std::nullopt, QuarantineEntry{record.id, "no usable patient/doctor exchange", "", 0}};
    const auto patients = count_role(turns, Role::patient);

    auto result = gateway::chat_structured<std::vector<std::string>>(
        gw, build_rewrite_prompt(record, options.backend_id),
        [&](const std::string& reply) { return read_reply(reply, patients); }, kFormatInstruction);
    if (!result.value) return {std::nullopt, QuarantineEntry{record.id, result.problem, result.reply, result.attempts}};

    DialogueSample s;
    s.id = std::string(to_string(record.source)) + "-" + record.id;
    s.source = record.source;
    s.department = record.department;
    std::size_t d = 0;
    for (const auto& t : turns) {
        if (t.role == Role::patient)
            s.turns.push_back(t);
        else
            s.turns.push_back({Role::doctor, (*result.value)[d++], {}});
    }
    s.stage_tag = StageTag::stage1;
    s.provenance.origin_record_id = record.id;
    s.provenance.pipeline_steps.push_back({std::string(gateway::tags::kReconstruct), options.backend_id,
                                           gateway::request_digest(result.request), sha256_hex(result.reply),
                                           options.clock()});
    return {std::move(s), std::nullopt};
}

ReconstructBatch reconstruct_all(const std::vector<RawRecord>& records, gateway::Gateway& gw,
                                 const ReconstructOptions& options) {
    auto results = parallel_map(records, options.workers,
                                [&](const RawRecord& r) { return reconstruct(r, gw, options); });
    ReconstructBatch out;
    for (auto& r : results) {
        if (r.sample) out.samples.push_back(std::move(*r.sample));
        if (r.quarantine) out.quarantine.push_back(std::move(*r.quarantine));
    }
    return out;
}

FidelityReport check_fidelity(const RawRecord& original, const DialogueSample& rebuilt,
                              const std::vector<std::string>& terms) {
    std::string original_doctor;
    std::size_t original_patients = 0;
    for (const auto& t : original.turns) {
        auto role = speaker_role(t.speaker);
        if (role == Role::doctor) original_doctor += t.text + "\n";
        if (role == Role::patient && !is_blank(t.text)) ++original_patients;
    }
    if (auto norm = normalize_turns(original); !norm.empty()) original_patients = count_role(norm, Role::patient);

    std::string rebuilt_doctor;
    std::size_t rebuilt_patients = 0;
    for (const auto& t : rebuilt.turns) {
        if (t.role == Role::doctor) rebuilt_doctor += t.content + "\n";
        if (t.role == Role::patient) ++rebuilt_patients;
    }

    FidelityReport report;
    report.patient_turns_equal = original_patients == rebuilt_patients;
    if (const auto len = utf8_length(trim(original_doctor)); len > 0)
        report.doctor_length_ratio = static_cast<double>(utf8_length(trim(rebuilt_doctor))) / static_cast<double>(len);
    std::size_t present = 0, kept = 0;
    for (const auto& term : terms) {
        if (term.empty() || !contains(original_doctor, term)) continue;
        ++present;
        kept += contains(rebuilt_doctor, term);
    }
    if (present > 0) report.term_retention = static_cast<double>(kept) / static_cast<double>(present);
    return report;
}

} // namespace forge::reconstruct

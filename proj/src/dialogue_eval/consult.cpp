#include <algorithm>
#include <set>

#include "forge/common/jsonl.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/random.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/dialogue_eval/dialogue_eval.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/gateway/structured.hpp"
#include "forge/sampling/sampler.hpp"

namespace forge::dialogue_eval {

using gateway::ChatRequest;
using gateway::MessageRole;

std::vector<EvalCase> load_cases(const std::filesystem::path& path, std::optional<EvalSource> source) {
    std::vector<EvalCase> out;
    std::set<std::string> ids;
    for_each_jsonl(path, [&](std::size_t, const json& record) {
        auto c = record.get<EvalCase>();
        if (source) c.source = *source;
        auto problems = eval_case_problems(c);
        if (!ids.insert(c.id).second) problems.push_back("duplicate id");
        if (!problems.empty()) throw ValidationError(c.id, std::move(problems));
        out.push_back(std::move(c));
    });
    return out;
}

void write_cases(const std::vector<EvalCase>& cases, const std::filesystem::path& path) {
    std::vector<json> records(cases.begin(), cases.end());
    write_jsonl(path, records);
}

namespace {

std::vector<EvalCase> draw_groups(const std::vector<EvalCase>& pool, EvalSource source,
                                  std::span<const std::string_view> groups, std::size_t per_group, std::uint64_t seed) {
    std::vector<std::string> keys;
    keys.reserve(pool.size());
    for (const auto& c : pool) {
        if (c.source != source)
            throw PreconditionError("case '" + c.id + "' is not a " + std::string(to_string(source)) + " case");
        keys.push_back(c.group_key);
    }
    sampling::SamplePlan plan;
    for (auto g : groups) plan.per_department_counts[std::string(g)] = per_group;
    plan.total = per_group * groups.size();
    plan.seed = seed;
    return sampling::take(pool, sampling::draw_stratified(keys, plan, seed));
}

} // namespace

std::vector<EvalCase> build_eval_set(const std::vector<EvalCase>& cmb_cases, const std::vector<EvalCase>& cmd_pool,
                                     const std::vector<EvalCase>& cmid_pool, std::uint64_t seed,
                                     const EvalSetSizes& sizes) {
    if (cmb_cases.size() < sizes.cmb_clin) throw ShortfallError("cmb_clin", sizes.cmb_clin, cmb_cases.size());
    for (const auto& c : cmb_cases)
        if (c.source != EvalSource::cmb_clin) throw PreconditionError("case '" + c.id + "' is not a cmb_clin case");
    auto out = sampling::take(cmb_cases, sampling::draw_uniform(cmb_cases.size(), sizes.cmb_clin,
                                                                derive_seed(seed, "eval:cmb_clin")));
    for (auto& c : draw_groups(cmd_pool, EvalSource::cmd, kCmdDepartments, sizes.per_department,
                               derive_seed(seed, "eval:cmd")))
        out.push_back(std::move(c));
    for (auto& c : draw_groups(cmid_pool, EvalSource::cmid, kCmidIntents, sizes.per_intent,
                               derive_seed(seed, "eval:cmid")))
        out.push_back(std::move(c));
    std::set<std::string> ids;
    for (const auto& c : out)
        if (!ids.insert(c.id).second) throw PreconditionError("case id '" + c.id + "' appears twice");
    return out;
}

namespace {

constexpr std::string_view kQuestionTags[] = {"question"};
struct Opening {
    std::string text;
};

const char* const kOpeningFormat = "Reply in exactly this form:\n[question] <the patient's first message>\n[END]";

} // namespace

ChatRequest build_opening_prompt(const EvalCase& c, const std::string& backend_id) {
    if (is_blank(c.case_material)) throw PreconditionError("case '" + c.id + "' has no case material");
    ChatRequest r;
    r.backend_id = backend_id;
    r.messages = {
        {MessageRole::system, "You help build realistic patient messages for a medical consultation benchmark."},
        {MessageRole::user,
         "Here is the record of a patient's case.\n\n" + render_input_block("case", c.case_material) +
             "\nWrite the first message this patient would send to a doctor online. Speak as the patient, in their "
             "own everyday words, describing the main complaint and asking for help. Mention only what a patient "
             "would know and leave out test results and any diagnosis.\n\n" + kOpeningFormat}};
    r.temperature = gateway::temperature::kGeneration;
    r.request_tag = std::string(gateway::tags::kEvalOpening);
    return r;
}

std::variant<EvalCase, OpeningFailure> open_question(const EvalCase& c, gateway::Gateway& gw,
                                                     const std::string& backend_id) {
    if (c.source != EvalSource::cmb_clin) return c;
    auto reply = gateway::chat_structured<Opening>(
        gw, build_opening_prompt(c, backend_id),
        [](const std::string& text) -> std::variant<Opening, std::string> {
            auto lines = parse_tagged(text, kQuestionTags);
            if (!lines || lines->size() != 1) return std::string("expected one [question] line closed by [END]");
            return Opening{(*lines)[0].text};
        },
        kOpeningFormat);
    if (!reply.value) return OpeningFailure{c.id, reply.problem, reply.reply};
    auto out = c;
    out.opening_question = reply.value->text;
    return out;
}

std::size_t Transcript::doctor_turns() const {
    return static_cast<std::size_t>(
        std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.role == Role::doctor; }));
}

void to_json(json& j, const Transcript& t) {
    j = json{{"case_id", t.case_id},     {"patient_backend", t.patient_backend},
             {"doctor_backend", t.doctor_backend}, {"rounds", t.rounds},
             {"complete", t.complete},   {"turns", t.turns}};
    if (t.failure) j["failure"] = *t.failure;
}

void from_json(const json& j, Transcript& t) {
    t.case_id = j.at("case_id").get<std::string>();
    t.patient_backend = j.at("patient_backend").get<std::string>();
    t.doctor_backend = j.at("doctor_backend").get<std::string>();
    t.rounds = j.at("rounds").get<std::size_t>();
    t.complete = j.at("complete").get<bool>();
    t.turns = j.at("turns").get<std::vector<Turn>>();
    t.failure.reset();
    if (auto it = j.find("failure"); it != j.end() && it->is_string()) t.failure = it->get<std::string>();
}

std::vector<std::string> transcript_problems(const Transcript& t, std::size_t rounds) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < t.turns.size(); ++i) {
        const auto expected = i % 2 == 0 ? Role::patient : Role::doctor;
        if (t.turns[i].role != expected)
            out.push_back("turn " + std::to_string(i) + " should be " + std::string(to_string(expected)));
        if (is_blank(t.turns[i].content)) out.push_back("turn " + std::to_string(i) + " is empty");
    }
    if (t.doctor_turns() != rounds)
        out.push_back("expected " + std::to_string(rounds) + " doctor turns, found " + std::to_string(t.doctor_turns()));
    if (t.turns.size() != 2 * rounds) out.push_back("expected " + std::to_string(2 * rounds) + " turns");
    return out;
}

std::string opening_of(const EvalCase& c) {
    if (c.opening_question) return *c.opening_question;
    if (c.source == EvalSource::cmb_clin)
        throw PreconditionError("case '" + c.id + "' has no opening question yet");
    return c.case_material;
}

ChatRequest build_doctor_request(const std::vector<Turn>& history, const std::string& backend_id) {
    ChatRequest r;
    r.backend_id = backend_id;
    for (const auto& t : history)
        r.messages.push_back({t.role == Role::patient ? MessageRole::user : MessageRole::assistant, t.content});
    r.temperature = gateway::temperature::kDeterministic;
    r.request_tag = std::string(gateway::tags::kDoctorTurn);
    return r;
}

ChatRequest build_patient_request(const EvalCase& c, const std::vector<Turn>& history, const std::string& backend_id) {
    ChatRequest r;
    r.backend_id = backend_id;
    r.messages.push_back(
        {MessageRole::system,
         "You are playing a patient who is talking to a doctor. Everything you know about your condition is in "
         "the case below.\n\n" +
             render_input_block("case", c.case_material) +
             "\nStay in character for the whole conversation. Answer the doctor's questions using details from the "
             "case, and share a detail only once the doctor asks about it. You do not know your diagnosis, so do "
             "not name one. Keep each message short and write only what the patient says."});
    for (const auto& t : history)
        r.messages.push_back({t.role == Role::patient ? MessageRole::assistant : MessageRole::user, t.content});
    r.temperature = gateway::temperature::kGeneration;
    r.request_tag = std::string(gateway::tags::kPatientTurn);
    return r;
}

Transcript run_consultation(const EvalCase& c, gateway::Gateway& gw, const std::string& patient_backend,
                            const std::string& doctor_backend, std::size_t rounds) {
    if (rounds == 0) throw PreconditionError("a consultation needs at least one round");
    Transcript t;
    t.case_id = c.id;
    t.patient_backend = patient_backend;
    t.doctor_backend = doctor_backend;
    t.rounds = rounds;
    t.turns.push_back({Role::patient, opening_of(c), {}});
    auto speak = [&](Role role) {
        const bool doctor = role == Role::doctor;
        auto req = doctor ? build_doctor_request(t.turns, doctor_backend) : build_patient_request(c, t.turns, patient_backend);
        std::string content;
        try {
            content = trim(gw.chat(req).content);
        } catch (const Error& e) {
            t.failure = std::string(doctor ? "doctor" : "patient") + " backend failed: " + e.what();
            return false;
        }
        if (content.empty()) {
            t.failure = std::string("empty reply from the ") + (doctor ? "doctor" : "patient") + " backend";
            return false;
        }
        t.turns.push_back({role, std::move(content), {}});
        return true;
    };
    for (std::size_t round = 1; round <= rounds; ++round) {
        if (round > 1 && !speak(Role::patient)) return t;
        if (!speak(Role::doctor)) return t;
    }
    t.complete = true;
    return t;
}

EvalRun run_evaluation(const std::vector<EvalCase>& cases, gateway::Gateway& gw, const EvalOptions& options) {
    const auto& opener = options.opening_backend.empty() ? options.patient_backend : options.opening_backend;
    EvalRun run;
    auto opened = parallel_map(cases, options.workers,
                               [&](const EvalCase& c) { return open_question(c, gw, opener); });
    for (auto& o : opened) {
        if (auto* c = std::get_if<EvalCase>(&o))
            run.cases.push_back(std::move(*c));
        else
            run.opening_failures.push_back(std::get<OpeningFailure>(std::move(o)));
    }

    run.transcripts = parallel_map(run.cases, options.workers, [&](const EvalCase& c) {
        return run_consultation(c, gw, options.patient_backend, options.doctor_backend, options.rounds);
    });

    std::vector<std::size_t> complete;
    for (std::size_t i = 0; i < run.transcripts.size(); ++i) {
        if (run.transcripts[i].complete)
            complete.push_back(i);
        else
            ++run.incomplete;
    }
    auto verdicts = parallel_map(complete, options.workers, [&](std::size_t i) {
        return judge(run.transcripts[i], gw, options.judge_backend);
    });
    for (std::size_t k = 0; k < complete.size(); ++k) {
        const auto& c = run.cases[complete[k]];
        if (verdicts[k].score)
            run.scored.push_back({c.id, c.source, c.group_key, *verdicts[k].score});
        else
            run.judge_failures.emplace_back(c.id, std::move(verdicts[k]));
    }
    return run;
}

} // namespace forge::dialogue_eval

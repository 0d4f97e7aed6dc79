#include <set>
#include <variant>

#include "forge/common/digest.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/random.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/gateway/structured.hpp"
#include "forge/mcq/medmcqa.hpp"
#include "forge/sampling/sampler.hpp"

namespace forge::mcq {

using gateway::ChatRequest;
using gateway::MessageRole;
using Pair = std::pair<std::string, std::string>;

namespace {

constexpr std::string_view kQaTags[] = {"instruction", "knowledge"};
constexpr std::string_view kDialogueTags[] = {"patient", "doctor"};

const char* const kQaFormat =
    "Reply in exactly this form:\n[instruction] <the question>\n[knowledge] <the answer>\n[END]";
const char* const kDialogueFormat =
    "Reply in exactly this form:\n[patient] <what the patient says>\n[doctor] <the doctor's reply>\n[END]";

std::string render_mcq(const McqItem& item) {
    std::string out = "question: " + normalize_whitespace(item.question) + "\n";
    for (const auto& [letter, text] : item.options) out += letter + ". " + normalize_whitespace(text) + "\n";
    out += "answer: " + item.gold + "\n";
    if (item.explanation) out += "explanation: " + normalize_whitespace(*item.explanation) + "\n";
    return out;
}

std::variant<Pair, std::string> read_pair(const std::string& reply, std::span<const std::string_view> tags) {
    auto lines = parse_tagged(reply, tags);
    if (!lines) return std::string("the reply is not a tagged list closed by [END]");
    if (lines->size() != 2 || (*lines)[0].tag != tags[0] || (*lines)[1].tag != tags[1])
        return "expected one [" + std::string(tags[0]) + "] line followed by one [" + std::string(tags[1]) + "] line";
    return Pair{(*lines)[0].text, (*lines)[1].text};
}

ChatRequest request(const std::string& backend_id, std::string system, std::string user, std::string_view tag) {
    ChatRequest r;
    r.backend_id = backend_id;
    r.messages = {{MessageRole::system, std::move(system)}, {MessageRole::user, std::move(user)}};
    r.temperature = gateway::temperature::kDeterministic;
    r.request_tag = std::string(tag);
    return r;
}

struct Converted {
    std::optional<DialogueSample> sample;
    ConversionQuarantine failure;
};

} // namespace

std::vector<std::size_t> choose_mcq_kept(std::size_t n, double mcq_fraction, std::uint64_t seed) {
    if (mcq_fraction < 0 || mcq_fraction > 1) throw ConfigError("mcq_fraction must lie in [0, 1]");
    return choose_indices(n, sampling::fraction_target(n, mcq_fraction), seed);
}

ChatRequest build_refine_prompt(const McqItem& item, const std::string& backend_id) {
    return request(backend_id, "You rewrite exam questions into questions and answers a patient would find useful.",
                   "Below is an exam question with its correct option.\n\n" + render_input_block("mcq", render_mcq(item)) +
                       "\nRewrite it as a standalone question that no longer refers to options, and an answer that "
                       "states the correct option and, where it helps, the reasoning behind it.\n\n" + kQaFormat,
                   gateway::tags::kMedMcqaRefine);
}

ChatRequest build_translate_qa_prompt(const std::string& instruction, const std::string& knowledge,
                                      const std::string& backend_id) {
    std::vector<TaggedLine> qa{{"instruction", instruction}, {"knowledge", knowledge}};
    return request(backend_id, "You translate medical content from English into fluent Simplified Chinese.",
                   "Translate the question and answer below into Simplified Chinese and present them as a one-round "
                   "consultation: the patient asks, the doctor answers. Keep every medical fact.\n\n" +
                       render_input_block("qa", render_tagged(qa, false)) + "\n" + kDialogueFormat,
                   gateway::tags::kTranslateQa);
}

ChatRequest build_translate_mcq_prompt(const McqItem& item, const std::string& backend_id) {
    return request(backend_id, "You translate medical content from English into fluent Simplified Chinese.",
                   "Translate the exam question below into Simplified Chinese. The patient turn holds the question "
                   "and all lettered options; the doctor turn names the correct letter and explains it.\n\n" +
                       render_input_block("mcq", render_mcq(item)) + "\n" + kDialogueFormat,
                   gateway::tags::kTranslateMcq);
}

ConversionBatch convert_medmcqa(const std::vector<McqItem>& items, gateway::Gateway& gw,
                                const ConversionOptions& options) {
    std::set<std::size_t> kept;
    for (auto p : choose_mcq_kept(items.size(), options.mcq_fraction, derive_seed(options.seed, "medmcqa:split")))
        kept.insert(p);

    auto step_of = [&](std::string_view tag, const gateway::StructuredReply<Pair>& r) {
        return PipelineStep{std::string(tag), options.backend_id, gateway::request_digest(r.request),
                            sha256_hex(r.reply), options.clock()};
    };
    auto fail = [](const McqItem& item, std::string_view step, const gateway::StructuredReply<Pair>& r) {
        return Converted{std::nullopt, {item.id, std::string(step), r.problem, r.reply}};
    };
    auto dialogue_parser = [](const std::string& r) { return read_pair(r, kDialogueTags); };

    std::vector<std::size_t> positions(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) positions[i] = i;
    auto results = parallel_map(positions, options.workers, [&](std::size_t i) {
        const auto& item = items[i];
        std::vector<PipelineStep> steps;
        gateway::StructuredReply<Pair> final_reply;
        if (kept.contains(i)) {
            final_reply = gateway::chat_structured<Pair>(gw, build_translate_mcq_prompt(item, options.backend_id),
                                                         dialogue_parser, kDialogueFormat);
            if (!final_reply.value) return fail(item, gateway::tags::kTranslateMcq, final_reply);
            steps.push_back(step_of(gateway::tags::kTranslateMcq, final_reply));
        } else {
            auto refined = gateway::chat_structured<Pair>(
                gw, build_refine_prompt(item, options.backend_id),
                [](const std::string& r) { return read_pair(r, kQaTags); }, kQaFormat);
            if (!refined.value) return fail(item, gateway::tags::kMedMcqaRefine, refined);
            steps.push_back(step_of(gateway::tags::kMedMcqaRefine, refined));
            final_reply = gateway::chat_structured<Pair>(
                gw, build_translate_qa_prompt(refined.value->first, refined.value->second, options.backend_id),
                dialogue_parser, kDialogueFormat);
            if (!final_reply.value) return fail(item, gateway::tags::kTranslateQa, final_reply);
            steps.push_back(step_of(gateway::tags::kTranslateQa, final_reply));
        }
        DialogueSample s;
        s.id = "medmcqa-" + item.id;
        s.source = Source::medmcqa;
        s.turns = {{Role::patient, final_reply.value->first, {}}, {Role::doctor, final_reply.value->second, {}}};
        s.stage_tag = StageTag::stage1;
        s.provenance.origin_record_id = item.id;
        s.provenance.pipeline_steps = std::move(steps);
        return Converted{std::move(s), {}};
    });

    ConversionBatch out;
    out.kept_mcq = kept.size();
    for (auto& r : results) {
        if (r.sample)
            out.samples.push_back(std::move(*r.sample));
        else
            out.quarantine.push_back(std::move(r.failure));
    }
    return out;
}

} // namespace forge::mcq

#include <variant>

#include "forge/common/digest.hpp"
#include "forge/common/error.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/gateway/structured.hpp"
#include "forge/kgqa/kgqa.hpp"

namespace forge::kgqa {

using gateway::ChatRequest;
using gateway::MessageRole;
using nlohmann::json;

namespace {

constexpr std::string_view kQaTags[] = {"instruction", "knowledge"};
constexpr std::string_view kDialogueTags[] = {"patient", "doctor"};

const char* const kStep1Format =
    "Reply in exactly this form:\n[instruction] <the question>\n[knowledge] <the answer>\n[END]";
const char* const kStep2Format =
    "Reply in exactly this form:\n[patient] <what the patient says>\n[doctor] <the doctor's reply>\n[END]";

// Two tagged entries with the given tags, in order.
std::variant<std::pair<std::string, std::string>, std::string> read_pair(const std::string& reply,
                                                                         std::span<const std::string_view> tags) {
    auto lines = parse_tagged(reply, tags);
    if (!lines) return std::string("the reply is not a tagged list closed by [END]");
    if (lines->size() != 2 || (*lines)[0].tag != tags[0] || (*lines)[1].tag != tags[1])
        return "expected one [" + std::string(tags[0]) + "] line followed by one [" + std::string(tags[1]) + "] line";
    return std::pair{(*lines)[0].text, (*lines)[1].text};
}

PipelineStep step_record(std::string_view tag, const gateway::StructuredReply<std::pair<std::string, std::string>>& r,
                         const KgqaOptions& options) {
    return {std::string(tag), options.backend_id, gateway::request_digest(r.request), sha256_hex(r.reply),
            options.clock()};
}

} // namespace

ChatRequest build_step1_prompt(const DiseaseBundle& bundle, const std::string& backend_id) {
    if (bundle.relations.empty())
        throw PreconditionError("bundle '" + bundle.disease_id + "' has no relations to turn into a question");
    std::string facts = "disease: " + bundle.disease + "\n";
    for (const auto& r : bundle.relations) facts += r.relation + ": " + r.object + "\n";

    ChatRequest req;
    req.backend_id = backend_id;
    req.messages = {
        {MessageRole::system, "You turn structured medical knowledge into plain question and answer pairs."},
        {MessageRole::user,
         "The facts below describe one disease and come from a medical knowledge graph.\n\n" +
             render_input_block("knowledge", facts) +
             "\nWrite one question a patient could ask about this disease, and an answer that states the listed "
             "facts in plain language. Use only these facts and add nothing of your own.\n\n" + kStep1Format}};
    req.temperature = gateway::temperature::kDeterministic;
    req.request_tag = std::string(gateway::tags::kKgqaStep1);
    return req;
}

ChatRequest build_step2_prompt(const QaPair& pair, const std::string& backend_id) {
    if (pair.instruction.empty() || pair.knowledge.empty()) throw PreconditionError("empty QA pair");
    std::vector<TaggedLine> qa{{"instruction", pair.instruction}, {"knowledge", pair.knowledge}};

    ChatRequest req;
    req.backend_id = backend_id;
    req.messages = {
        {MessageRole::system, "You write short, realistic exchanges between a patient and a doctor."},
        {MessageRole::user,
         "Turn the question and answer below into a one-round consultation. The patient describes their "
         "situation in their own words and asks; the doctor answers. Every fact in the answer must appear in "
         "the doctor's reply. Vary who the patient is and how they speak.\n\n" +
             render_input_block("qa", render_tagged(qa, false)) + "\n" + kStep2Format}};
    req.temperature = gateway::temperature::kGeneration;
    req.request_tag = std::string(gateway::tags::kKgqaStep2);
    return req;
}

StepOutcome generate_one(const DiseaseBundle& bundle, gateway::Gateway& gw, const KgqaOptions& options) {
    using Pair = std::pair<std::string, std::string>;
    StepOutcome out;
    auto step1 = gateway::chat_structured<Pair>(
        gw, build_step1_prompt(bundle, options.backend_id), [](const std::string& r) { return read_pair(r, kQaTags); },
        kStep1Format);
    if (!step1.value) {
        out.failed_step = gateway::tags::kKgqaStep1;
        out.reason = step1.problem;
        out.raw_response = step1.reply;
        return out;
    }
    const auto first = step_record(gateway::tags::kKgqaStep1, step1, options);
    out.pair = QaPair{step1.value->first, step1.value->second};

    auto step2 = gateway::chat_structured<Pair>(
        gw, build_step2_prompt(*out.pair, options.backend_id),
        [](const std::string& r) { return read_pair(r, kDialogueTags); }, kStep2Format);
    if (!step2.value) {
        out.failed_step = gateway::tags::kKgqaStep2;
        out.reason = step2.problem;
        out.raw_response = step2.reply;
        return out;
    }

    DialogueSample s;
    s.id = "kgqa-" + bundle.disease_id;
    s.source = Source::kgqa;
    s.department = bundle.department;
    s.turns = {{Role::patient, step2.value->first, {}}, {Role::doctor, step2.value->second, {}}};
    s.stage_tag = StageTag::stage1;
    s.provenance.origin_record_id = bundle.disease_id;
    s.provenance.pipeline_steps = {first, step_record(gateway::tags::kKgqaStep2, step2, options)};
    out.sample = std::move(s);
    return out;
}

KgqaBatch generate_all(const std::vector<DiseaseBundle>& bundles, gateway::Gateway& gw, const KgqaOptions& options) {
    auto results = parallel_map(bundles, options.workers,
                                [&](const DiseaseBundle& b) { return generate_one(b, gw, options); });
    KgqaBatch out;
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto& r = results[i];
        if (r.sample)
            out.samples.push_back(std::move(*r.sample));
        else
            out.quarantine.push_back({bundles[i].disease_id, r.failed_step, r.reason, r.raw_response});
    }
    return out;
}

json generation_report(const KnowledgeGraph& graph, const SampledBundles& sampled, const KgqaBatch& batch) {
    json dangling = json::array();
    for (const auto& d : graph.dangling)
        dangling.push_back({{"src", d.src}, {"relation", d.relation}, {"dst", d.dst}, {"reason", d.reason}});
    json warnings = json::array();
    for (const auto& w : sampled.warnings)
        warnings.push_back({{"department", w.department}, {"requested", w.requested}, {"available", w.available}});
    json quarantine = json::array();
    for (const auto& q : batch.quarantine)
        quarantine.push_back({{"bundle_id", q.bundle_id}, {"step", q.step}, {"reason", q.reason}, {"raw_response", q.raw_response}});
    std::map<std::string, std::size_t> emitted;
    for (const auto& s : batch.samples) ++emitted[s.department.value_or("")];
    return json{{"nodes", graph.node_count},
                {"edges", graph.edge_count},
                {"diseases_assigned", graph.bundles.size()},
                {"relations_attached", graph.relation_count()},
                {"unassigned_diseases", graph.unassigned},
                {"dangling_edges", dangling},
                {"requested_plan", sampling::to_json(sampled.requested_plan)},
                {"effective_plan", sampling::to_json(sampled.effective_plan)},
                {"shortfall_warnings", warnings},
                {"emitted", batch.samples.size()},
                {"emitted_per_department", emitted},
                {"quarantined", quarantine}};
}

} // namespace forge::kgqa

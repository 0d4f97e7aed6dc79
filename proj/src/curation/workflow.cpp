#include <algorithm>
#include <variant>

#include "forge/common/digest.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/random.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/curation/curation.hpp"
#include "forge/datamodel/validate.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/gateway/structured.hpp"
#include "forge/sampling/sampler.hpp"

namespace forge::curation {

using gateway::ChatRequest;
using gateway::MessageRole;

namespace {

constexpr std::string_view kDialogueTags[] = {"patient", "doctor"};

const char* const kFormat =
    "Reply with one line per turn, each starting with [patient] or [doctor]. Begin with the patient, end with "
    "the doctor, and finish with a line that contains only [END].";

std::string render_dialogue(const DialogueSample& s) {
    std::vector<TaggedLine> lines;
    for (const auto& t : s.turns)
        if (t.role != Role::system) lines.push_back({std::string(to_string(t.role)), t.content});
    return render_tagged(lines, false);
}

std::variant<std::vector<Turn>, std::string> read_dialogue(const std::string& reply) {
    auto lines = parse_tagged(reply, kDialogueTags);
    if (!lines) return std::string("the reply is not a tagged dialogue closed by [END]");
    std::vector<Turn> turns;
    for (std::size_t i = 0; i < lines->size(); ++i) {
        const auto& want = i % 2 == 0 ? "patient" : "doctor";
        if ((*lines)[i].tag != want) return "turn " + std::to_string(i + 1) + " should be a " + want + " turn";
        turns.push_back({i % 2 == 0 ? Role::patient : Role::doctor, (*lines)[i].text, {}});
    }
    if (turns.back().role != Role::doctor) return std::string("the dialogue must end with the doctor");
    return turns;
}

bool leaks(const DialogueSample& s, const std::set<std::string>& ids) {
    return ids.contains(s.id) || (s.provenance.origin_record_id && ids.contains(*s.provenance.origin_record_id));
}

// Hands out exemplar indices from a deck that is reshuffled whenever it
// runs out, so usage counts differ by at most one per pass.
class ExemplarDeck {
public:
    ExemplarDeck(std::size_t size, std::uint64_t seed) : size_(size), rng_(seed) {}

    std::vector<std::size_t> deal(std::size_t k) {
        k = std::min(k, size_);
        std::vector<std::size_t> hand;
        std::vector<std::size_t> held_back;
        while (hand.size() < k) {
            if (deck_.empty()) refill();
            auto next = deck_.back();
            deck_.pop_back();
            if (std::find(hand.begin(), hand.end(), next) != hand.end())
                held_back.push_back(next);
            else
                hand.push_back(next);
        }
        deck_.insert(deck_.end(), held_back.rbegin(), held_back.rend());
        return hand;
    }

private:
    void refill() {
        std::vector<std::size_t> fresh(size_);
        for (std::size_t i = 0; i < size_; ++i) fresh[i] = i;
        rng_.shuffle(fresh);
        deck_.insert(deck_.begin(), fresh.begin(), fresh.end());
    }

    std::size_t size_;
    Rng rng_;
    std::vector<std::size_t> deck_;
};

} // namespace

std::string exchange_bucket(const DialogueSample& s) {
    std::size_t patients = 0;
    for (const auto& t : s.turns) patients += t.role == Role::patient;
    if (patients <= 1) return "1";
    if (patients <= 3) return "2-3";
    return "4+";
}

std::vector<CurationItem> select_candidates(const std::vector<DialogueSample>& pool,
                                            const std::set<std::string>& exclusion_ids, std::size_t target,
                                            std::uint64_t seed) {
    std::vector<std::string> leaked;
    std::set<std::string> seen;
    for (const auto& s : pool) {
        if (leaks(s, exclusion_ids)) leaked.push_back(s.id);
        if (!seen.insert(s.id).second) throw PreconditionError("candidate pool repeats id '" + s.id + "'");
    }
    if (!leaked.empty())
        throw LeakError(std::to_string(leaked.size()) + " candidate(s) were already used in stage-1 data", leaked);
    if (target > pool.size()) throw ShortfallError("<candidate pool>", target, pool.size());
    if (target == 0) return {};

    std::vector<std::string> strata;
    std::map<std::string, std::size_t> counts;
    for (const auto& s : pool) {
        strata.push_back(s.department.value_or("unknown") + "|" + exchange_bucket(s));
        ++counts[strata.back()];
    }
    auto plan = sampling::plan_stratified(DepartmentDistribution::from_counts(counts), target, derive_seed(seed, "strata"));
    std::vector<CurationItem> out;
    for (auto pos : sampling::draw_stratified(strata, plan, seed)) {
        CurationItem item;
        item.id = pool[pos].id;
        item.candidate = pool[pos];
        out.push_back(std::move(item));
    }
    return out;
}

ChatRequest build_generation_prompt(const std::vector<const CurationItem*>& exemplars, const CurationItem& seed,
                                    const std::string& backend_id) {
    std::string user = "Each example below shows how the doctor should behave: attentive, careful with claims, "
                       "and clear about when the patient needs to be seen in person.\n\n";
    for (std::size_t i = 0; i < exemplars.size(); ++i)
        user += render_input_block("example_" + std::to_string(i + 1), render_dialogue(exemplars[i]->effective())) + "\n";
    user += "Rewrite the consultation in the seed block so that its doctor behaves the way the examples show. "
            "Keep the patient's situation and concerns.\n\n" +
            render_input_block("seed", render_dialogue(seed.effective())) + "\n" + kFormat + "\n";

    ChatRequest req;
    req.backend_id = backend_id;
    req.messages = {{MessageRole::system, "You write patient and doctor consultations used to train an AI doctor."},
                    {MessageRole::user, std::move(user)}};
    req.temperature = gateway::temperature::kGeneration;
    req.request_tag = std::string(gateway::tags::kPreferenceGenerate);
    return req;
}

GenerationBatch generate_preference_set(const std::vector<CurationItem>& exemplars,
                                        const std::vector<CurationItem>& seeds, gateway::Gateway& gw,
                                        const GenerationOptions& options) {
    if (exemplars.empty()) throw PreconditionError("few-shot generation needs at least one promoted exemplar");
    GenerationBatch batch;
    if (options.target == 0) return batch;
    if (seeds.empty()) throw PreconditionError("few-shot generation needs at least one seed candidate");

    std::vector<std::size_t> seed_order(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) seed_order[i] = i;
    Rng(derive_seed(options.seed, "seeds")).shuffle(seed_order);
    ExemplarDeck deck(exemplars.size(), derive_seed(options.seed, "exemplars"));

    struct Job {
        std::size_t seed_index;
        ChatRequest request;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < options.target; ++i) {
        std::vector<const CurationItem*> shots;
        for (auto e : deck.deal(options.exemplars_per_prompt)) {
            shots.push_back(&exemplars[e]);
            ++batch.exemplar_usage[exemplars[e].id];
        }
        const auto s = seed_order[i % seed_order.size()];
        jobs.push_back({s, build_generation_prompt(shots, seeds[s], options.backend_id)});
        batch.prompt_digests.push_back(gateway::request_digest(jobs.back().request));
    }

    auto results = parallel_map(jobs, options.workers, [&](const Job& job) {
        return gateway::chat_structured<std::vector<Turn>>(gw, job.request, read_dialogue, kFormat);
    });

    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& seed = seeds[jobs[i].seed_index];
        auto& r = results[i];
        if (!r.value) {
            batch.quarantine.push_back({seed.id, r.problem, r.reply});
            continue;
        }
        CurationItem item;
        item.id = "gen-" + seed.id + "-" + batch.prompt_digests[i].substr(0, 10);
        auto& s = item.candidate;
        s.id = item.id;
        s.source = Source::preference;
        s.department = seed.candidate.department;
        s.turns = std::move(*r.value);
        s.stage_tag = StageTag::stage2;
        s.provenance.origin_record_id = seed.candidate.provenance.origin_record_id.value_or(seed.id);
        s.provenance.pipeline_steps.push_back({std::string(gateway::tags::kPreferenceGenerate), options.backend_id,
                                               gateway::request_digest(r.request), sha256_hex(r.reply),
                                               options.clock()});
        if (auto v = validate_sample(s); !v.empty()) {
            batch.quarantine.push_back({seed.id, v.front().describe(), r.reply});
            continue;
        }
        batch.items.push_back(std::move(item));
    }
    return batch;
}

GenerationBatch generate_into_store(CurationStore& store, gateway::Gateway& gw, const GenerationOptions& options) {
    auto exemplars = store.list(ItemState::promoted_exemplar);
    std::vector<CurationItem> seeds;
    for (const auto& i : store.list())
        if (!i.generated() && (i.state == ItemState::pending || i.state == ItemState::accepted)) seeds.push_back(i);
    auto batch = generate_preference_set(exemplars, seeds, gw, options);

    auto existing = store.ids();
    std::vector<CurationItem> fresh;
    for (auto& item : batch.items) {
        if (existing.insert(item.id).second)
            fresh.push_back(std::move(item));
        else
            batch.quarantine.push_back({item.id, "duplicate of an item already in the store", ""});
    }
    batch.items = fresh;
    store.add(batch.items);
    return batch;
}

std::vector<DialogueSample> export_preference_set(const CurationStore& store, const std::set<std::string>& stage1_ids) {
    std::vector<DialogueSample> out;
    std::vector<std::string> leaked;
    for (const auto& item : store.list()) {
        if (item.state != ItemState::accepted && item.state != ItemState::edited) continue;
        DialogueSample s = item.candidate;
        s.id = item.id;
        s.turns = item.effective().turns;
        s.source = Source::preference;
        s.stage_tag = StageTag::stage2;
        s.provenance.human_edited = s.provenance.human_edited || item.state == ItemState::edited;
        if (leaks(s, stage1_ids) || leaks(item.candidate, stage1_ids)) leaked.push_back(item.id);
        out.push_back(std::move(s));
    }
    if (!leaked.empty())
        throw LeakError(std::to_string(leaked.size()) + " preference sample(s) overlap stage-1 data", leaked);
    return out;
}

} // namespace forge::curation

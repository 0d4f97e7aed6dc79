#include <set>

#include "forge/common/digest.hpp"
#include "forge/common/parallel.hpp"
#include "forge/common/random.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/mcq/mcq.hpp"
#include "forge/sampling/sampler.hpp"

namespace forge::mcq {

const std::map<McqSubset, std::size_t>& reference_sizes() {
    static const std::map<McqSubset, std::size_t> sizes{
        {McqSubset::mlec_clinic, 3362},      {McqSubset::mlec_cwm, 2674}, {McqSubset::mlec_publichealth, 1853},
        {McqSubset::mlec_stomatology, 2644}, {McqSubset::mlec_tcm, 3086}, {McqSubset::neep306, 270},
    };
    return sizes;
}

const std::map<McqSubset, std::size_t>& reference_targets() {
    static const std::map<McqSubset, std::size_t> targets{
        {McqSubset::mlec_clinic, 336},      {McqSubset::mlec_cwm, 268}, {McqSubset::mlec_publichealth, 185},
        {McqSubset::mlec_stomatology, 264}, {McqSubset::mlec_tcm, 309}, {McqSubset::neep306, 270},
    };
    return targets;
}

std::size_t Benchmark::mlec_total() const {
    std::size_t n = 0;
    for (const auto& [subset, count] : counts)
        if (is_mlec(subset)) n += count;
    return n;
}

Benchmark assemble_benchmark(const std::map<McqSubset, std::vector<McqItem>>& full_sets,
                             const std::map<McqSubset, std::size_t>& targets, std::uint64_t seed,
                             double fallback_fraction) {
    Benchmark out;
    out.seed = seed;
    for (auto subset : kAllMcqSubsets) {
        auto set_it = full_sets.find(subset);
        auto target_it = targets.find(subset);
        if (set_it == full_sets.end()) {
            if (target_it != targets.end() && target_it->second > 0)
                throw ShortfallError(std::string(to_string(subset)), target_it->second, 0);
            continue;
        }
        const auto& pool = set_it->second;
        const auto n = target_it != targets.end() ? target_it->second
                                                  : sampling::fraction_target(pool.size(), fallback_fraction);
        if (n > pool.size()) throw ShortfallError(std::string(to_string(subset)), n, pool.size());
        auto positions = sampling::draw_uniform(pool.size(), n, derive_seed(seed, "mcq:" + std::string(to_string(subset))));
        for (auto p : positions) {
            auto item = pool[p];
            item.subset = subset;
            out.items.push_back(std::move(item));
        }
        out.counts[subset] = n;
    }
    std::set<std::string> ids;
    for (const auto& item : out.items)
        if (!ids.insert(item.id).second) throw PreconditionError("item id '" + item.id + "' appears in two subsets");
    return out;
}

std::string_view to_string(PromptMode m) { return m == PromptMode::zero_shot ? "zero" : "few"; }

PromptMode parse_prompt_mode(std::string_view s) {
    if (s == "zero" || s == "zero_shot") return PromptMode::zero_shot;
    if (s == "few" || s == "few_shot") return PromptMode::few_shot;
    throw Error("unknown prompt mode '" + std::string(s) + "'");
}

void check_shot_leak(const std::vector<McqItem>& benchmark, const std::map<McqSubset, std::vector<McqItem>>& pools) {
    std::set<std::string> shot_ids, shot_questions;
    for (const auto& [subset, pool] : pools)
        for (const auto& shot : pool) {
            shot_ids.insert(shot.id);
            shot_questions.insert(normalize_whitespace(shot.question));
        }
    std::vector<std::string> leaked;
    for (const auto& item : benchmark)
        if (shot_ids.contains(item.id) || shot_questions.contains(normalize_whitespace(item.question)))
            leaked.push_back(item.id);
    if (!leaked.empty()) throw LeakError("benchmark items appear in the few-shot pool", std::move(leaked));
}

std::vector<McqItem> choose_shots(const std::vector<McqItem>& pool, std::size_t k, std::uint64_t seed) {
    if (k > pool.size())
        throw ShortfallError("shot pool", k, pool.size());
    return sampling::take(pool, choose_indices(pool.size(), k, seed));
}

namespace {

std::string render_question(const McqItem& item) {
    std::string out = normalize_whitespace(item.question);
    for (const auto& [letter, text] : item.options) out += "\n" + letter + ". " + normalize_whitespace(text);
    return out;
}

constexpr std::string_view kSystem =
    "You are sitting a medical examination. Each question has exactly one best option. "
    "Read the question and options carefully before you decide.";

constexpr std::string_view kFormat = "Reply with a single line of the form \"Answer: X\", where X is the option letter.";

} // namespace

gateway::ChatRequest build_mcq_prompt(const McqItem& item, const std::vector<McqItem>& shots, PromptMode mode,
                                      const std::string& backend_id) {
    if (mode == PromptMode::few_shot && shots.empty()) throw PreconditionError("few-shot prompt needs shots");
    if (mode == PromptMode::zero_shot && !shots.empty()) throw PreconditionError("zero-shot prompt takes no shots");
    std::vector<std::string> leaked;
    for (const auto& s : shots)
        if (s.id == item.id || normalize_whitespace(s.question) == normalize_whitespace(item.question))
            leaked.push_back(s.id);
    if (!leaked.empty()) throw LeakError("shot duplicates the evaluated item", std::move(leaked));

    std::string user;
    if (!shots.empty()) {
        user += "Worked examples:\n\n";
        for (std::size_t i = 0; i < shots.size(); ++i)
            user += render_input_block("example_" + std::to_string(i + 1),
                                       render_question(shots[i]) + "\nAnswer: " + shots[i].gold) +
                    "\n\n";
    }
    user += render_input_block("question", render_question(item)) + "\n\n" + std::string(kFormat);

    gateway::ChatRequest r;
    r.backend_id = backend_id;
    r.messages = {{gateway::MessageRole::system, std::string(kSystem)}, {gateway::MessageRole::user, user}};
    r.temperature = gateway::temperature::kDeterministic;
    r.max_tokens = 256;
    r.request_tag = std::string(gateway::tags::kMcqAnswer);
    return r;
}

void to_json(json& j, const Prediction& p) {
    j = json{{"item_id", p.item_id}, {"response", p.response}, {"answer", nullptr}};
    if (p.answer) j["answer"] = *p.answer;
}

void from_json(const json& j, Prediction& p) {
    p.item_id = j.at("item_id").get<std::string>();
    p.response = j.value("response", std::string{});
    p.answer.reset();
    if (auto it = j.find("answer"); it != j.end() && it->is_string()) p.answer = it->get<std::string>();
}

std::vector<Prediction> run_benchmark(const Benchmark& benchmark,
                                      const std::map<McqSubset, std::vector<McqItem>>& shot_pools,
                                      gateway::Gateway& gw, const RunOptions& options) {
    std::map<McqSubset, std::vector<McqItem>> shots;
    if (options.mode == PromptMode::few_shot) {
        if (options.shots == 0) throw PreconditionError("few-shot mode needs at least one shot");
        check_shot_leak(benchmark.items, shot_pools);
        for (const auto& [subset, count] : benchmark.counts) {
            auto it = shot_pools.find(subset);
            if (it == shot_pools.end() || it->second.empty())
                throw PreconditionError("no shot pool for subset " + std::string(to_string(subset)));
            shots[subset] =
                choose_shots(it->second, options.shots, derive_seed(options.seed, "shots:" + std::string(to_string(subset))));
        }
    }
    static const std::vector<McqItem> kNoShots;
    return parallel_map(benchmark.items, options.workers, [&](const McqItem& item) {
        auto it = shots.find(item.subset);
        const auto& item_shots = it == shots.end() ? kNoShots : it->second;
        auto resp = gw.chat(build_mcq_prompt(item, item_shots, options.mode, options.backend_id));
        return Prediction{item.id, resp.content, extract_answer(resp.content, item.options)};
    });
}

} // namespace forge::mcq

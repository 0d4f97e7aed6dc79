#pragma once

// Multiple-choice benchmark: loading, assembly, prompting, answer
// extraction and scoring.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/common/clock.hpp"
#include "forge/datamodel/types.hpp"
#include "forge/gateway/gateway.hpp"

namespace forge::mcq {

using nlohmann::json;

struct RejectedItem {
    std::size_t line = 0;
    std::string id;
    std::vector<std::string> reasons;
};

struct LoadedSet {
    std::vector<McqItem> items;
    std::vector<RejectedItem> rejected;
};

/// Accepts the canonical record ({"options": {"A": ...}, "gold": "A"}) and
/// common variants: options as a list, `answer` for `gold`, lowercase or
/// "A." style letters, a 0-based `answer_idx`, or MedMCQA's opa..opd/cop.
/// Throws Error when a required field is missing; the result may still
/// break McqItem invariants.
McqItem normalize_record(const json& record, McqSubset fallback_subset);

/// Items that break an invariant, or repeat an id, land in `rejected`.
/// `subset` overrides the file; without it every record names its subset.
LoadedSet load_mcq(const std::filesystem::path& path, std::optional<McqSubset> subset = std::nullopt);

/// Published test-set sizes and sample sizes of the six subsets.
const std::map<McqSubset, std::size_t>& reference_sizes();
const std::map<McqSubset, std::size_t>& reference_targets();

struct Benchmark {
    std::vector<McqItem> items;  // subset order, then source order
    std::map<McqSubset, std::size_t> counts;
    std::uint64_t seed = 0;

    std::size_t mlec_total() const;
};

/// Draws `targets[s]` items from each subset without replacement. Subsets
/// present in `full_sets` but missing from `targets` fall back to
/// round-half-up(size * fallback_fraction). Throws ShortfallError when a
/// target exceeds its set.
Benchmark assemble_benchmark(const std::map<McqSubset, std::vector<McqItem>>& full_sets,
                             const std::map<McqSubset, std::size_t>& targets, std::uint64_t seed,
                             double fallback_fraction = 0.1);

void write_benchmark(const Benchmark& b, const std::filesystem::path& path);
Benchmark read_benchmark(const std::filesystem::path& path);

enum class PromptMode { zero_shot, few_shot };
std::string_view to_string(PromptMode m);
PromptMode parse_prompt_mode(std::string_view s);

/// Throws LeakError naming every benchmark item that also appears in a shot
/// pool, matched by id or by identical question text.
void check_shot_leak(const std::vector<McqItem>& benchmark, const std::map<McqSubset, std::vector<McqItem>>& pools);

/// `k` shots for one subset, fixed for the whole run.
std::vector<McqItem> choose_shots(const std::vector<McqItem>& pool, std::size_t k, std::uint64_t seed);

/// Question and lettered options in the `question` input block, worked
/// examples in `example_N` blocks. Throws PreconditionError on few-shot
/// without shots or zero-shot with shots, LeakError if a shot is the item.
gateway::ChatRequest build_mcq_prompt(const McqItem& item, const std::vector<McqItem>& shots, PromptMode mode,
                                      const std::string& backend_id);

/// Letter of the chosen option, or nullopt to abstain. Tries answer
/// patterns ("Answer: B", "答案是B", "the correct option is (C)", a bare
/// letter) in order of position, then a unique verbatim option text.
std::optional<std::string> extract_answer(const std::string& response, const std::map<std::string, std::string>& options);

struct Prediction {
    std::string item_id;
    std::string response;
    std::optional<std::string> answer;  // nullopt = abstained

    bool operator==(const Prediction&) const = default;
};

void to_json(json& j, const Prediction& p);
void from_json(const json& j, Prediction& p);

struct RunOptions {
    std::string backend_id;
    PromptMode mode = PromptMode::zero_shot;
    std::size_t shots = 3;
    std::uint64_t seed = 0;
    std::size_t workers = 4;
};

/// Queries the backend for every item. Shot pools are only read in
/// few-shot mode; leak checks run before any request is sent.
std::vector<Prediction> run_benchmark(const Benchmark& benchmark,
                                      const std::map<McqSubset, std::vector<McqItem>>& shot_pools,
                                      gateway::Gateway& gw, const RunOptions& options);

class MissingPredictionsError : public Error {
public:
    MissingPredictionsError(const std::string& what, std::vector<std::string> ids);
    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    std::vector<std::string> ids_;
};

enum class Averaging { unweighted, weighted };

struct SubsetScore {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t abstained = 0;
    double accuracy = 0;  // percent
};

struct McqReport {
    std::map<McqSubset, SubsetScore> subsets;
    double unweighted_average = 0;  // mean of subset accuracies
    double weighted_average = 0;    // pooled over items
    Averaging averaging = Averaging::unweighted;
    std::size_t abstained = 0;
    double abstention_rate = 0;  // percent

    double average() const { return averaging == Averaging::unweighted ? unweighted_average : weighted_average; }
};

/// Abstentions score as wrong. Throws MissingPredictionsError listing
/// benchmark items without a prediction, and PreconditionError on
/// duplicate or unknown prediction ids.
McqReport score(const std::vector<Prediction>& predictions, const Benchmark& benchmark,
                Averaging averaging = Averaging::unweighted);

/// Mean of percentages, as used for the table's average column.
double unweighted_average(const std::vector<double>& subset_accuracies);

json to_json(const McqReport& r);
/// Fixed-width table, accuracies at two decimals.
std::string render_table(const McqReport& r, const std::string& label);

} // namespace forge::mcq

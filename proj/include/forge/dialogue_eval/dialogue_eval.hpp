#pragma once

// Multi-turn consultation benchmark: case selection, simulated patients,
// rubric judging and score aggregation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "forge/common/clock.hpp"
#include "forge/datamodel/types.hpp"
#include "forge/gateway/gateway.hpp"

namespace forge::dialogue_eval {

using nlohmann::json;

/// Reads EvalCase records; throws ValidationError on a broken case and
/// ParseError on a malformed line.
std::vector<EvalCase> load_cases(const std::filesystem::path& path, std::optional<EvalSource> source = std::nullopt);
void write_cases(const std::vector<EvalCase>& cases, const std::filesystem::path& path);

struct EvalSetSizes {
    std::size_t cmb_clin = 73;
    std::size_t per_department = 20;
    std::size_t per_intent = 30;
};

/// All CMB-Clin cases (drawn down to `sizes.cmb_clin` if more are given),
/// `per_department` CMD cases for each of the six departments and
/// `per_intent` CMID cases for each intent. Output order: CMB-Clin, CMD,
/// CMID, each in pool order. Throws ShortfallError naming the stratum.
std::vector<EvalCase> build_eval_set(const std::vector<EvalCase>& cmb_cases, const std::vector<EvalCase>& cmd_pool,
                                     const std::vector<EvalCase>& cmid_pool, std::uint64_t seed,
                                     const EvalSetSizes& sizes = {});

gateway::ChatRequest build_opening_prompt(const EvalCase& c, const std::string& backend_id);

struct OpeningFailure {
    std::string case_id;
    std::string reason;
    std::string raw_response;
};

/// Sets the opening question of a CMB-Clin case. CMD and CMID cases open
/// with their own query and pass through untouched.
std::variant<EvalCase, OpeningFailure> open_question(const EvalCase& c, gateway::Gateway& gw,
                                                     const std::string& backend_id);

struct Transcript {
    std::string case_id;
    std::string patient_backend;
    std::string doctor_backend;
    std::vector<Turn> turns;  // patient first, strictly alternating
    std::size_t rounds = 0;
    bool complete = false;
    std::optional<std::string> failure;

    std::size_t doctor_turns() const;
    bool operator==(const Transcript&) const = default;
};

void to_json(json& j, const Transcript& t);
void from_json(const json& j, Transcript& t);

/// Empty when the transcript alternates patient/doctor from a patient
/// opening and holds exactly `rounds` doctor turns.
std::vector<std::string> transcript_problems(const Transcript& t, std::size_t rounds);

/// The opening message of a case (its opening question, or the query).
std::string opening_of(const EvalCase& c);

gateway::ChatRequest build_doctor_request(const std::vector<Turn>& history, const std::string& backend_id);
gateway::ChatRequest build_patient_request(const EvalCase& c, const std::vector<Turn>& history,
                                           const std::string& backend_id);

/// The opening counts as the first patient turn; each round is one patient
/// turn followed by one doctor reply. A backend error or empty reply stops
/// the dialogue and leaves an incomplete transcript with its failure.
Transcript run_consultation(const EvalCase& c, gateway::Gateway& gw, const std::string& patient_backend,
                            const std::string& doctor_backend, std::size_t rounds = 3);

inline constexpr std::array<std::string_view, 4> kMetricNames{"proactivity", "accuracy", "helpfulness",
                                                              "linguistic_quality"};

gateway::ChatRequest build_judge_request(const Transcript& t, const std::string& backend_id);

/// Reads `name: n` lines (any order, each metric once) or, failing that,
/// exactly four bare integers in metric order. Scores must be integers in
/// [1, 5]; anything else is reported as the problem.
std::variant<JudgeScore, std::string> parse_verdict(const std::string& reply);

struct JudgeOutcome {
    std::optional<JudgeScore> score;
    std::string problem;
    std::string raw_response;
};

/// One retry on an unusable verdict. Throws PreconditionError on an
/// incomplete transcript.
JudgeOutcome judge(const Transcript& t, gateway::Gateway& gw, const std::string& backend_id);

enum class GroupBy { none, source, department, intent };
std::string_view to_string(GroupBy g);
GroupBy parse_group_by(std::string_view s);

struct ScoredCase {
    std::string case_id;
    EvalSource source = EvalSource::cmb_clin;
    std::string group_key;
    JudgeScore score;
};

struct MetricRow {
    std::string group;
    std::size_t cases = 0;
    std::array<double, 4> means{};  // kMetricNames order
    double overall = 0;             // mean of the four means
};

struct Aggregate {
    GroupBy group_by = GroupBy::none;
    std::vector<MetricRow> rows;
};

/// Per-metric means and their mean. `department` keeps CMD cases and
/// `intent` keeps CMID cases; grouped rows are sorted by overall score,
/// highest first. Sums are order-independent. Throws PreconditionError
/// when nothing is left to aggregate.
Aggregate aggregate(const std::vector<ScoredCase>& scored, GroupBy group_by);

/// Row for fixed metric means, for checking a published table row.
MetricRow row_from_means(const std::string& group, const std::array<double, 4>& means);

json to_json(const Aggregate& a);
/// Two-decimal, half-up table.
std::string render_table(const Aggregate& a);

struct EvalOptions {
    std::string doctor_backend;
    std::string patient_backend;
    std::string judge_backend;
    std::string opening_backend;  // empty: the patient backend
    std::size_t rounds = 3;
    std::size_t workers = 4;
};

struct EvalRun {
    std::vector<EvalCase> cases;  // with openings
    std::vector<Transcript> transcripts;
    std::vector<ScoredCase> scored;
    std::vector<OpeningFailure> opening_failures;
    std::vector<std::pair<std::string, JudgeOutcome>> judge_failures;
    std::size_t incomplete = 0;
};

/// Openings, consultations and judging for every case. Incomplete
/// transcripts and unusable verdicts are reported, not scored.
EvalRun run_evaluation(const std::vector<EvalCase>& cases, gateway::Gateway& gw, const EvalOptions& options);

/// Counts, failures and the aggregate for each grouping.
json run_report(const EvalRun& run);

} // namespace forge::dialogue_eval

#pragma once

// Shared domain types. Every type here is an immutable-by-convention value:
// build it, validate it, then pass it around by const reference or copy.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

enum class Role { patient, doctor, system };
enum class Source { meddialog, cmedqa2, kgqa, preference, medmcqa, general };
enum class StageTag { stage1, stage2 };
enum class Ability { domain_knowledge, behavioral_pattern, dialogue_ability, human_preference };
enum class McqSubset { mlec_clinic, mlec_cwm, mlec_publichealth, mlec_stomatology, mlec_tcm, neep306 };
enum class EvalSource { cmb_clin, cmd, cmid };

std::string_view to_string(Role r);
std::string_view to_string(Source s);
std::string_view to_string(StageTag s);
std::string_view to_string(Ability a);
std::string_view to_string(McqSubset s);
std::string_view to_string(EvalSource s);

// Parsers throw forge::Error on an unknown name.
Role parse_role(std::string_view s);
Source parse_source(std::string_view s);
StageTag parse_stage_tag(std::string_view s);
Ability parse_ability(std::string_view s);
McqSubset parse_mcq_subset(std::string_view s);
EvalSource parse_eval_source(std::string_view s);

inline constexpr McqSubset kAllMcqSubsets[] = {
    McqSubset::mlec_clinic,      McqSubset::mlec_cwm, McqSubset::mlec_publichealth,
    McqSubset::mlec_stomatology, McqSubset::mlec_tcm, McqSubset::neep306,
};

bool is_mlec(McqSubset s);

struct Turn {
    Role role = Role::patient;
    std::string content;
    std::map<std::string, std::string> meta;

    bool operator==(const Turn&) const = default;
};

struct PipelineStep {
    std::string step_name;
    std::string backend_id;
    std::string prompt_hash;
    std::string response_hash;
    std::int64_t timestamp_ms = 0;

    bool operator==(const PipelineStep&) const = default;
};

struct ProvenanceRecord {
    std::optional<std::string> origin_record_id;
    std::vector<PipelineStep> pipeline_steps;
    bool human_edited = false;

    bool operator==(const ProvenanceRecord&) const = default;
};

/// One doctor/patient conversation. Single-turn QA is a 2-turn sample.
struct DialogueSample {
    std::string id;
    Source source = Source::meddialog;
    std::optional<std::string> department;
    std::vector<Turn> turns;
    StageTag stage_tag = StageTag::stage1;
    ProvenanceRecord provenance;

    bool operator==(const DialogueSample&) const = default;
};

struct Relation {
    std::string relation;  // symptom, medication, cause, treatment, attribute
    std::string object;

    bool operator==(const Relation&) const = default;
};

inline constexpr std::string_view kRelationKinds[] = {"symptom", "medication", "cause", "treatment",
                                                      "attribute"};
bool is_relation_kind(std::string_view s);

struct DiseaseBundle {
    std::string disease_id;
    std::string disease;
    std::string department;
    std::vector<Relation> relations;

    bool operator==(const DiseaseBundle&) const = default;
};

/// Normalized frequency map over departments.
class DepartmentDistribution {
public:
    /// Throws forge::Error unless the map is nonempty, every weight is
    /// finite and non-negative, and the weights sum to 1 within 1e-9.
    explicit DepartmentDistribution(std::map<std::string, double> weights);

    /// Normalizes non-negative counts into a distribution.
    static DepartmentDistribution from_counts(const std::map<std::string, std::size_t>& counts);

    const std::map<std::string, double>& weights() const noexcept { return weights_; }
    double weight(const std::string& department) const;
    std::size_t size() const noexcept { return weights_.size(); }

    bool operator==(const DepartmentDistribution&) const = default;

private:
    std::map<std::string, double> weights_;
};

struct ManifestComponent {
    std::string name;
    Source source = Source::meddialog;
    std::size_t target_size = 0;
    StageTag stage_tag = StageTag::stage1;
    std::set<Ability> abilities;

    bool operator==(const ManifestComponent&) const = default;
};

struct DatasetManifest {
    std::vector<ManifestComponent> components;
    std::uint64_t seed = 0;

    bool operator==(const DatasetManifest&) const = default;
};

/// Throws forge::Error naming the first broken manifest invariant.
void validate_manifest(const DatasetManifest& m);

struct McqItem {
    std::string id;
    McqSubset subset = McqSubset::mlec_clinic;
    std::string question;
    std::map<std::string, std::string> options;  // "A" -> text, consecutive from A
    std::string gold;
    std::optional<std::string> explanation;

    bool operator==(const McqItem&) const = default;
};

/// Empty when the item satisfies its invariants, otherwise the reasons.
std::vector<std::string> mcq_item_problems(const McqItem& item);

struct EvalCase {
    std::string id;
    EvalSource source = EvalSource::cmb_clin;
    std::string group_key;
    std::string case_material;
    std::optional<std::string> opening_question;

    bool operator==(const EvalCase&) const = default;
};

inline constexpr std::string_view kCmdDepartments[] = {"internal_medicine", "surgery",    "pediatrics",
                                                       "andrology",         "gynecology", "oncology"};
inline constexpr std::string_view kCmidIntents[] = {"symptoms", "treatment", "medication", "others"};

std::vector<std::string> eval_case_problems(const EvalCase& c);

/// Four rubric scores, each in [1, 5].
struct JudgeScore {
    double proactivity = 1;
    double accuracy = 1;
    double helpfulness = 1;
    double linguistic_quality = 1;
    std::optional<std::string> rationale;

    double average() const;
    bool in_range() const;

    bool operator==(const JudgeScore&) const = default;
};

struct TrainStageConfig {
    int stage = 1;
    int global_batch_size = 0;
    double learning_rate = 0;
    std::string optimizer;
    int epochs = 0;
    int max_seq_len = 0;
    int warmup_steps = 0;
    double weight_decay = 0;

    bool operator==(const TrainStageConfig&) const = default;
};

void validate_train_config(const TrainStageConfig& c);

} // namespace forge

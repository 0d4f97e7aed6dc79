#pragma once

// Raw forum dialogues: filtering, LLM rewriting of doctor turns, and
// fidelity checks against the original.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/common/clock.hpp"
#include "forge/datamodel/taxonomy.hpp"
#include "forge/datamodel/types.hpp"
#include "forge/gateway/gateway.hpp"

namespace forge::reconstruct {

struct RawTurn {
    std::string speaker;  // free-form; mapped to a Role during reconstruction
    std::string text;

    bool operator==(const RawTurn&) const = default;
};

/// One scraped conversation. `department_path` holds the labels as found
/// (possibly ancestor-first); `department` is the resolved leaf.
struct RawRecord {
    std::string id;
    Source source = Source::meddialog;
    std::vector<std::string> department_path;
    std::optional<std::string> department;
    std::vector<RawTurn> turns;

    bool operator==(const RawRecord&) const = default;
};

nlohmann::json to_json(const RawRecord& r);
/// Accepts "department" as a string or a label list. Throws Error when the
/// source is not a forum corpus or there are no turns.
RawRecord raw_record_from_json(const nlohmann::json& j);
std::vector<RawRecord> read_raw_records(const std::filesystem::path& path);

/// Sets `department` on every record from its label path. Throws
/// IngestError listing the unresolvable labels.
void resolve_departments(std::vector<RawRecord>& records, const DepartmentTaxonomy& taxonomy);

/// Maps a speaker label to a dialogue role (English or Chinese forms).
std::optional<Role> speaker_role(std::string_view speaker);

/// Role-mapped turns with consecutive same-speaker turns merged, leading
/// doctor turns and a trailing patient turn dropped. Empty when a speaker
/// is unknown or no exchange remains.
std::vector<Turn> normalize_turns(const RawRecord& record);

/// The record as a sample without any rewriting (normalized turns, id
/// `<source>-<id>`, origin set). Nullopt when no exchange remains.
std::optional<DialogueSample> raw_as_sample(const RawRecord& record, StageTag stage = StageTag::stage2);

// --- filtering ---

enum class FilterKind { keyword_block, keyword_require, min_turns, max_turns, entity_require };
std::string_view to_string(FilterKind k);
FilterKind parse_filter_kind(std::string_view s);

struct FilterRule {
    std::string id;
    FilterKind kind = FilterKind::keyword_block;
    std::vector<std::string> terms;  // keywords, or entity types for entity_require
    std::size_t bound = 0;           // min_turns / max_turns
};

struct Entity {
    std::string text;
    std::string type;

    bool operator==(const Entity&) const = default;
};

/// Named-entity hook. Implementations may throw; filter_records turns a
/// failure into a rejection instead of aborting.
class EntityDetector {
public:
    virtual ~EntityDetector() = default;
    virtual std::vector<Entity> detect(std::string_view text) const = 0;
};

/// Reference detector: exact term lists plus regular expressions per type.
///
/// File form: {"terms": {"symptom": ["cough", ...]},
///             "patterns": {"drug": ["[a-z]+mycin"]}}
class GazetteerEntityDetector final : public EntityDetector {
public:
    GazetteerEntityDetector(std::map<std::string, std::vector<std::string>> terms,
                            std::map<std::string, std::vector<std::string>> patterns = {});
    static GazetteerEntityDetector from_json(const nlohmann::json& j);
    static GazetteerEntityDetector load(const std::filesystem::path& path);

    std::vector<Entity> detect(std::string_view text) const override;

private:
    struct Compiled;
    std::map<std::string, std::vector<std::string>> terms_;
    std::shared_ptr<const Compiled> compiled_;
};

/// Throws ConfigError for an empty id, a duplicate id, an empty term list
/// on a keyword or entity rule, or an entity rule without a detector.
void validate_rules(const std::vector<FilterRule>& rules, bool have_detector);
std::vector<FilterRule> filter_rules_from_json(const nlohmann::json& j);
std::vector<FilterRule> load_filter_rules(const std::filesystem::path& path);

struct Rejection {
    RawRecord record;
    std::string rule_id;
    std::string reason;
};

struct FilterOutcome {
    std::vector<RawRecord> kept;
    std::vector<Rejection> rejected;
};

/// Stable partition: a record is kept iff it passes every rule, checked in
/// order. Each rejection names the first failing rule.
FilterOutcome filter_records(const std::vector<RawRecord>& records, const std::vector<FilterRule>& rules,
                             const EntityDetector* detector = nullptr);

// --- rewriting ---

/// System + user messages asking for a rewrite of the doctor turns. The
/// dialogue travels in a `dialogue` input block as tagged lines and the
/// reply must use the same tags, closed by [END].
gateway::ChatRequest build_rewrite_prompt(const RawRecord& record, const std::string& backend_id);

/// The three rewriting rules, as embedded in the prompt.
const std::vector<std::string>& rewrite_rules();

struct QuarantineEntry {
    std::string record_id;
    std::string reason;
    std::string raw_response;  // last reply received, empty if none
    std::size_t attempts = 0;
};

nlohmann::json to_json(const QuarantineEntry& q);
void write_quarantine(const std::vector<QuarantineEntry>& entries, const std::filesystem::path& path);

struct ReconstructOptions {
    std::string backend_id;
    std::size_t workers = 4;
    Clock clock = system_clock_ms();
};

struct ReconstructResult {
    std::optional<DialogueSample> sample;
    std::optional<QuarantineEntry> quarantine;
};

/// Rewrites one record. An unparseable reply is retried once with a format
/// reminder; a second failure quarantines the record. Gateway errors
/// (transport, replay miss) propagate.
ReconstructResult reconstruct(const RawRecord& record, gateway::Gateway& gw, const ReconstructOptions& options);

struct ReconstructBatch {
    std::vector<DialogueSample> samples;
    std::vector<QuarantineEntry> quarantine;
};

/// Parallel over records; outputs keep input order.
ReconstructBatch reconstruct_all(const std::vector<RawRecord>& records, gateway::Gateway& gw,
                                 const ReconstructOptions& options);

// --- fidelity ---

struct FidelityReport {
    bool patient_turns_equal = false;
    /// Code points of rebuilt doctor text over the original's; nullopt
    /// when the original has no doctor text.
    std::optional<double> doctor_length_ratio;
    /// Share of the terms present in the original doctor turns that also
    /// appear in the rebuilt ones; nullopt when none were present.
    std::optional<double> term_retention;
};

FidelityReport check_fidelity(const RawRecord& original, const DialogueSample& rebuilt,
                              const std::vector<std::string>& terms);

} // namespace forge::reconstruct

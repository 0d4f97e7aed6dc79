#pragma once

// Human-guided preference curation: candidate selection, the review state
// machine with a durable audit log, exemplar-driven few-shot generation,
// and export of the stage-2 set.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/common/clock.hpp"
#include "forge/common/error.hpp"
#include "forge/datamodel/types.hpp"
#include "forge/gateway/gateway.hpp"

namespace forge::curation {

enum class ItemState { pending, accepted, edited, rejected, promoted_exemplar };
enum class DecisionKind { accept, edit, reject, promote };

std::string_view to_string(ItemState s);
std::string_view to_string(DecisionKind d);
ItemState parse_item_state(std::string_view s);
DecisionKind parse_decision_kind(std::string_view s);

/// Target state of `d` from `from`, or nullopt when the move is illegal:
/// pending -> accepted | edited | rejected, accepted | edited -> promoted.
std::optional<ItemState> transition(ItemState from, DecisionKind d);

struct CurationItem {
    std::string id;
    DialogueSample candidate;
    ItemState state = ItemState::pending;
    std::optional<DialogueSample> edited_version;
    std::string reviewer;
    std::optional<std::int64_t> decided_at;
    std::string notes;

    bool operator==(const CurationItem&) const = default;
    /// Edited text when present, else the candidate.
    const DialogueSample& effective() const { return edited_version ? *edited_version : candidate; }
    bool generated() const { return candidate.source == Source::preference; }
};

nlohmann::json to_json(const CurationItem& item);
CurationItem item_from_json(const nlohmann::json& j);

struct Decision {
    DecisionKind kind = DecisionKind::accept;
    std::optional<DialogueSample> edited;  // required for edit
    std::string notes;
};

class IllegalTransitionError : public Error {
public:
    IllegalTransitionError(const std::string& item_id, ItemState from, DecisionKind d);
    ItemState from() const noexcept { return from_; }

private:
    ItemState from_;
};

class StoreCorruptError : public Error {
public:
    using Error::Error;
};

struct StoreStats {
    std::map<std::string, std::size_t> by_state;
    std::size_t total = 0;
};

/// Items plus an append-only audit log (`audit.jsonl`) and a periodic
/// snapshot (`snapshot.json`). Opening a store loads the snapshot and
/// replays later log events; any unreadable line refuses the open.
/// Mutations are serialized; reads may run concurrently.
class CurationStore {
public:
    explicit CurationStore(std::filesystem::path dir, Clock clock = system_clock_ms(),
                           std::size_t snapshot_every = 50);
    ~CurationStore();
    CurationStore(const CurationStore&) = delete;
    CurationStore& operator=(const CurationStore&) = delete;

    /// Adds new pending items; ids must be unused.
    void add(const std::vector<CurationItem>& items);

    /// Applies one decision. Throws NotFoundError, IllegalTransitionError,
    /// ValidationError (edited sample invalid; state unchanged) or
    /// PreconditionError (missing reviewer or edited sample).
    CurationItem submit(const std::string& item_id, const Decision& decision, const std::string& reviewer);

    std::optional<CurationItem> get(const std::string& id) const;
    /// Items in insertion order, optionally filtered.
    std::vector<CurationItem> list(std::optional<ItemState> state = std::nullopt,
                                   const std::optional<std::string>& department = std::nullopt) const;
    std::set<std::string> ids() const;
    StoreStats stats() const;

    /// Writes a snapshot now.
    void flush();

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path audit_path() const { return dir_ / "audit.jsonl"; }
    std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

    /// Rebuilds the item list from an audit log alone.
    static std::vector<CurationItem> replay(const std::filesystem::path& audit_log);

private:
    void append_event(nlohmann::json event);
    void write_snapshot_locked();

    std::filesystem::path dir_;
    Clock clock_;
    std::size_t snapshot_every_;
    mutable std::shared_mutex mu_;
    std::vector<CurationItem> items_;
    std::map<std::string, std::size_t> index_;
    std::ofstream log_;
    std::uint64_t seq_ = 0;
    std::uint64_t snapshot_seq_ = 0;
};

/// Exchange-count bucket used for diversity: "1", "2-3" or "4+".
std::string exchange_bucket(const DialogueSample& s);

/// Seeded, stratified by (department, exchange bucket) in proportion to
/// the pool. Throws LeakError when any pool id or origin record id is in
/// `exclusion_ids`, ShortfallError when the pool is too small.
std::vector<CurationItem> select_candidates(const std::vector<DialogueSample>& pool,
                                            const std::set<std::string>& exclusion_ids, std::size_t target,
                                            std::uint64_t seed);

struct GenerationOptions {
    std::string backend_id;
    std::size_t target = 2000;
    std::size_t exemplars_per_prompt = 3;
    std::uint64_t seed = 0;
    std::size_t workers = 4;
    Clock clock = system_clock_ms();
};

struct GenerationQuarantine {
    std::string seed_id;
    std::string reason;
    std::string raw_response;
};

struct GenerationBatch {
    std::vector<CurationItem> items;  // pending, source=preference, stage2
    std::vector<GenerationQuarantine> quarantine;
    std::vector<std::string> prompt_digests;
    std::map<std::string, std::size_t> exemplar_usage;
};

gateway::ChatRequest build_generation_prompt(const std::vector<const CurationItem*>& exemplars,
                                             const CurationItem& seed, const std::string& backend_id);

/// One generation per target slot: seeds are cycled in a seeded order and
/// exemplars are dealt from a reshuffled deck so usage stays even.
/// Throws PreconditionError without exemplars (or without seeds when
/// target > 0).
GenerationBatch generate_preference_set(const std::vector<CurationItem>& exemplars,
                                        const std::vector<CurationItem>& seeds, gateway::Gateway& gw,
                                        const GenerationOptions& options);

/// Generation over a store: promoted items are the exemplars, selected
/// pending/accepted items the seeds; results are added as pending.
GenerationBatch generate_into_store(CurationStore& store, gateway::Gateway& gw, const GenerationOptions& options);

/// The stage-2 set: every accepted or edited item, edited text substituted,
/// source=preference, stage2. Throws LeakError if any sample id or origin
/// record id is in `stage1_ids`.
std::vector<DialogueSample> export_preference_set(const CurationStore& store, const std::set<std::string>& stage1_ids);

} // namespace forge::curation

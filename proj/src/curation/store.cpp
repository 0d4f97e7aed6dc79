#include <algorithm>

#include "forge/common/jsonl.hpp"
#include "forge/common/text.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/datamodel/validate.hpp"
#include "forge/curation/curation.hpp"

namespace forge::curation {

using nlohmann::json;

namespace {

constexpr ItemState kStates[] = {ItemState::pending, ItemState::accepted, ItemState::edited, ItemState::rejected,
                                 ItemState::promoted_exemplar};
constexpr DecisionKind kDecisions[] = {DecisionKind::accept, DecisionKind::edit, DecisionKind::reject,
                                       DecisionKind::promote};

using Index = std::map<std::string, std::size_t>;

void apply_add(std::vector<CurationItem>& items, Index& index, CurationItem item) {
    if (index.contains(item.id)) throw Error("curation item '" + item.id + "' already exists");
    index.emplace(item.id, items.size());
    items.push_back(std::move(item));
}

void apply_decision(CurationItem& item, DecisionKind kind, const std::string& reviewer, std::int64_t at,
                    const std::string& notes, std::optional<DialogueSample> edited) {
    auto next = transition(item.state, kind);
    if (!next) throw IllegalTransitionError(item.id, item.state, kind);
    item.state = *next;
    item.reviewer = reviewer;
    item.decided_at = at;
    if (!notes.empty()) item.notes = notes;
    if (kind == DecisionKind::edit) item.edited_version = std::move(edited);
}

void apply_event(std::vector<CurationItem>& items, Index& index, const json& e) {
    const auto type = e.at("type").get<std::string>();
    if (type == "add") {
        apply_add(items, index, item_from_json(e.at("item")));
    } else if (type == "decision") {
        auto it = index.find(e.at("item_id").get<std::string>());
        if (it == index.end()) throw Error("decision for unknown item");
        std::optional<DialogueSample> edited;
        if (e.contains("edited_version")) edited = e.at("edited_version").get<DialogueSample>();
        apply_decision(items[it->second], parse_decision_kind(e.at("decision").get<std::string>()),
                       e.at("reviewer").get<std::string>(), e.at("at").get<std::int64_t>(), e.value("notes", ""),
                       std::move(edited));
    } else {
        throw Error("unknown audit event '" + type + "'");
    }
}

} // namespace

std::string_view to_string(ItemState s) {
    switch (s) {
    case ItemState::pending: return "pending";
    case ItemState::accepted: return "accepted";
    case ItemState::edited: return "edited";
    case ItemState::rejected: return "rejected";
    case ItemState::promoted_exemplar: return "promoted_exemplar";
    }
    return "?";
}

std::string_view to_string(DecisionKind d) {
    switch (d) {
    case DecisionKind::accept: return "accept";
    case DecisionKind::edit: return "edit";
    case DecisionKind::reject: return "reject";
    case DecisionKind::promote: return "promote";
    }
    return "?";
}

ItemState parse_item_state(std::string_view s) {
    for (auto x : kStates)
        if (to_string(x) == s) return x;
    throw Error("unknown item state '" + std::string(s) + "'");
}

DecisionKind parse_decision_kind(std::string_view s) {
    for (auto x : kDecisions)
        if (to_string(x) == s) return x;
    throw Error("unknown decision '" + std::string(s) + "'");
}

std::optional<ItemState> transition(ItemState from, DecisionKind d) {
    switch (from) {
    case ItemState::pending:
        if (d == DecisionKind::accept) return ItemState::accepted;
        if (d == DecisionKind::edit) return ItemState::edited;
        if (d == DecisionKind::reject) return ItemState::rejected;
        return std::nullopt;
    case ItemState::accepted:
    case ItemState::edited:
        if (d == DecisionKind::promote) return ItemState::promoted_exemplar;
        return std::nullopt;
    case ItemState::rejected:
    case ItemState::promoted_exemplar:
        return std::nullopt;
    }
    return std::nullopt;
}

IllegalTransitionError::IllegalTransitionError(const std::string& item_id, ItemState from, DecisionKind d)
    : Error("item '" + item_id + "' cannot go from " + std::string(to_string(from)) + " via " +
            std::string(to_string(d))),
      from_(from) {}

json to_json(const CurationItem& item) {
    json j{{"id", item.id},
           {"candidate", item.candidate},
           {"state", to_string(item.state)},
           {"reviewer", item.reviewer},
           {"notes", item.notes}};
    if (item.edited_version) j["edited_version"] = *item.edited_version;
    if (item.decided_at) j["decided_at"] = *item.decided_at;
    return j;
}

CurationItem item_from_json(const json& j) {
    CurationItem item;
    item.id = j.at("id").get<std::string>();
    item.candidate = j.at("candidate").get<DialogueSample>();
    item.state = parse_item_state(j.value("state", "pending"));
    if (j.contains("edited_version")) item.edited_version = j.at("edited_version").get<DialogueSample>();
    item.reviewer = j.value("reviewer", "");
    if (j.contains("decided_at")) item.decided_at = j.at("decided_at").get<std::int64_t>();
    item.notes = j.value("notes", "");
    if (item.state == ItemState::edited && !item.edited_version)
        throw Error("item '" + item.id + "' is edited but has no edited version");
    return item;
}

CurationStore::CurationStore(std::filesystem::path dir, Clock clock, std::size_t snapshot_every)
    : dir_(std::move(dir)), clock_(std::move(clock)), snapshot_every_(std::max<std::size_t>(snapshot_every, 1)) {
    std::filesystem::create_directories(dir_);
    try {
        if (std::filesystem::exists(snapshot_path())) {
            auto snap = json::parse(read_text_file(snapshot_path()));
            snapshot_seq_ = seq_ = snap.at("seq").get<std::uint64_t>();
            for (const auto& j : snap.at("items")) apply_add(items_, index_, item_from_json(j));
        }
        if (std::filesystem::exists(audit_path())) {
            for_each_jsonl(audit_path(), [&](std::size_t, const json& e) {
                const auto seq = e.at("seq").get<std::uint64_t>();
                if (seq <= snapshot_seq_) return;
                if (seq != seq_ + 1) throw Error("audit log skips from " + std::to_string(seq_) + " to " + std::to_string(seq));
                apply_event(items_, index_, e);
                seq_ = seq;
            });
        }
    } catch (const std::exception& e) {
        throw StoreCorruptError("curation store at " + dir_.string() + " is unreadable: " + e.what());
    }
    log_.open(audit_path(), std::ios::app | std::ios::binary);
    if (!log_) throw Error("cannot open audit log " + audit_path().string());
}

CurationStore::~CurationStore() {
    try {
        flush();
    } catch (...) {
    }
}

void CurationStore::append_event(json event) {
    event["seq"] = seq_ + 1;
    log_ << event.dump() << '\n';
    log_.flush();
    if (!log_) throw Error("failed to append to audit log " + audit_path().string());
    ++seq_;
}

void CurationStore::write_snapshot_locked() {
    json items = json::array();
    for (const auto& i : items_) items.push_back(to_json(i));
    write_text_atomic(snapshot_path(), json{{"seq", seq_}, {"items", items}}.dump() + "\n");
    snapshot_seq_ = seq_;
}

void CurationStore::add(const std::vector<CurationItem>& items) {
    std::unique_lock lock(mu_);
    std::set<std::string> fresh;
    for (const auto& i : items) {
        if (i.id.empty()) throw PreconditionError("curation item without an id");
        if (index_.contains(i.id) || !fresh.insert(i.id).second)
            throw PreconditionError("curation item '" + i.id + "' already exists");
        if (i.state != ItemState::pending) throw PreconditionError("new curation items must be pending");
        require_valid(i.candidate);
    }
    for (const auto& i : items) {
        append_event(json{{"type", "add"}, {"item", to_json(i)}});
        apply_add(items_, index_, i);
    }
    if (seq_ - snapshot_seq_ >= snapshot_every_) write_snapshot_locked();
}

CurationItem CurationStore::submit(const std::string& item_id, const Decision& decision, const std::string& reviewer) {
    if (is_blank(reviewer)) throw PreconditionError("a reviewer name is required");
    std::optional<DialogueSample> edited;
    if (decision.kind == DecisionKind::edit) {
        if (!decision.edited) throw PreconditionError("an edit decision needs the edited sample");
        edited = *decision.edited;
        edited->provenance.human_edited = true;
        auto violations = validate_sample(*edited);
        if (!violations.empty()) {
            std::vector<std::string> text;
            for (const auto& v : violations) text.push_back(v.describe());
            throw ValidationError(item_id, std::move(text));
        }
    }

    std::unique_lock lock(mu_);
    auto it = index_.find(item_id);
    if (it == index_.end()) throw NotFoundError("no curation item '" + item_id + "'");
    auto& item = items_[it->second];
    if (!transition(item.state, decision.kind)) throw IllegalTransitionError(item.id, item.state, decision.kind);

    const auto at = clock_();
    json event{{"type", "decision"},
               {"item_id", item_id},
               {"decision", to_string(decision.kind)},
               {"reviewer", reviewer},
               {"at", at}};
    if (!decision.notes.empty()) event["notes"] = decision.notes;
    if (edited) event["edited_version"] = *edited;
    append_event(std::move(event));
    apply_decision(item, decision.kind, reviewer, at, decision.notes, std::move(edited));
    if (seq_ - snapshot_seq_ >= snapshot_every_) write_snapshot_locked();
    return item;
}

std::optional<CurationItem> CurationStore::get(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return items_[it->second];
}

std::vector<CurationItem> CurationStore::list(std::optional<ItemState> state,
                                              const std::optional<std::string>& department) const {
    std::shared_lock lock(mu_);
    std::vector<CurationItem> out;
    for (const auto& i : items_) {
        if (state && i.state != *state) continue;
        if (department && i.candidate.department != *department) continue;
        out.push_back(i);
    }
    return out;
}

std::set<std::string> CurationStore::ids() const {
    std::shared_lock lock(mu_);
    std::set<std::string> out;
    for (const auto& [id, _] : index_) out.insert(id);
    return out;
}

StoreStats CurationStore::stats() const {
    std::shared_lock lock(mu_);
    StoreStats s;
    for (auto st : kStates) s.by_state[std::string(to_string(st))] = 0;
    for (const auto& i : items_) ++s.by_state[std::string(to_string(i.state))];
    s.total = items_.size();
    return s;
}

void CurationStore::flush() {
    std::unique_lock lock(mu_);
    write_snapshot_locked();
}

std::vector<CurationItem> CurationStore::replay(const std::filesystem::path& audit_log) {
    std::vector<CurationItem> items;
    Index index;
    for_each_jsonl(audit_log, [&](std::size_t, const json& e) { apply_event(items, index, e); });
    return items;
}

} // namespace forge::curation

#include "forge/datamodel/types.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "forge/common/error.hpp"
#include "forge/common/text.hpp"

namespace forge {

namespace {

template <class E, std::size_t N>
std::string_view name_of(E value, const std::pair<E, std::string_view> (&table)[N]) {
    for (const auto& [e, name] : table)
        if (e == value) return name;
    return "unknown";
}

template <class E, std::size_t N>
E parse_from(std::string_view s, const std::pair<E, std::string_view> (&table)[N], const char* what) {
    for (const auto& [e, name] : table)
        if (name == s) return e;
    throw Error(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::pair<Role, std::string_view> kRoles[] = {
    {Role::patient, "patient"}, {Role::doctor, "doctor"}, {Role::system, "system"}};

constexpr std::pair<Source, std::string_view> kSources[] = {
    {Source::meddialog, "meddialog"},   {Source::cmedqa2, "cmedqa2"}, {Source::kgqa, "kgqa"},
    {Source::preference, "preference"}, {Source::medmcqa, "medmcqa"}, {Source::general, "general"}};

constexpr std::pair<StageTag, std::string_view> kStages[] = {{StageTag::stage1, "stage1"},
                                                             {StageTag::stage2, "stage2"}};

constexpr std::pair<Ability, std::string_view> kAbilities[] = {
    {Ability::domain_knowledge, "domain_knowledge"},
    {Ability::behavioral_pattern, "behavioral_pattern"},
    {Ability::dialogue_ability, "dialogue_ability"},
    {Ability::human_preference, "human_preference"}};

constexpr std::pair<McqSubset, std::string_view> kSubsets[] = {
    {McqSubset::mlec_clinic, "mlec_clinic"},
    {McqSubset::mlec_cwm, "mlec_cwm"},
    {McqSubset::mlec_publichealth, "mlec_publichealth"},
    {McqSubset::mlec_stomatology, "mlec_stomatology"},
    {McqSubset::mlec_tcm, "mlec_tcm"},
    {McqSubset::neep306, "neep306"}};

constexpr std::pair<EvalSource, std::string_view> kEvalSources[] = {
    {EvalSource::cmb_clin, "cmb_clin"}, {EvalSource::cmd, "cmd"}, {EvalSource::cmid, "cmid"}};

} // namespace

std::string_view to_string(Role r) { return name_of(r, kRoles); }
std::string_view to_string(Source s) { return name_of(s, kSources); }
std::string_view to_string(StageTag s) { return name_of(s, kStages); }
std::string_view to_string(Ability a) { return name_of(a, kAbilities); }
std::string_view to_string(McqSubset s) { return name_of(s, kSubsets); }
std::string_view to_string(EvalSource s) { return name_of(s, kEvalSources); }

Role parse_role(std::string_view s) { return parse_from(s, kRoles, "role"); }
Source parse_source(std::string_view s) { return parse_from(s, kSources, "source"); }
StageTag parse_stage_tag(std::string_view s) { return parse_from(s, kStages, "stage tag"); }
Ability parse_ability(std::string_view s) { return parse_from(s, kAbilities, "ability"); }
McqSubset parse_mcq_subset(std::string_view s) { return parse_from(s, kSubsets, "mcq subset"); }
EvalSource parse_eval_source(std::string_view s) { return parse_from(s, kEvalSources, "eval source"); }

bool is_mlec(McqSubset s) { return s != McqSubset::neep306; }

bool is_relation_kind(std::string_view s) {
    return std::find(std::begin(kRelationKinds), std::end(kRelationKinds), s) != std::end(kRelationKinds);
}

DepartmentDistribution::DepartmentDistribution(std::map<std::string, double> weights)
    : weights_(std::move(weights)) {
    if (weights_.empty()) throw Error("department distribution is empty");
    double sum = 0;
    for (const auto& [dept, w] : weights_) {
        if (!std::isfinite(w) || w < 0) throw Error("department '" + dept + "' has an invalid weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw Error("department weights sum to " + std::to_string(sum) + ", expected 1");
}

DepartmentDistribution DepartmentDistribution::from_counts(const std::map<std::string, std::size_t>& counts) {
    std::size_t total = 0;
    for (const auto& [_, c] : counts) total += c;
    if (total == 0) throw Error("department distribution is empty");
    std::map<std::string, double> w;
    for (const auto& [dept, c] : counts)
        w[dept] = static_cast<double>(c) / static_cast<double>(total);
    return DepartmentDistribution(std::move(w));
}

double DepartmentDistribution::weight(const std::string& department) const {
    auto it = weights_.find(department);
    return it == weights_.end() ? 0.0 : it->second;
}

void validate_manifest(const DatasetManifest& m) {
    if (m.components.empty()) throw Error("manifest has no components");
    std::set<std::string> names;
    for (const auto& c : m.components) {
        if (c.name.empty()) throw Error("manifest component without a name");
        if (!names.insert(c.name).second) throw Error("duplicate manifest component '" + c.name + "'");
        if (c.target_size == 0) throw Error("component '" + c.name + "' has target_size 0");
        if (c.abilities.empty()) throw Error("component '" + c.name + "' lists no abilities");
    }
}

std::vector<std::string> mcq_item_problems(const McqItem& item) {
    std::vector<std::string> out;
    if (item.id.empty()) out.push_back("missing id");
    if (is_blank(item.question)) out.push_back("empty question");
    if (item.options.size() < 2) out.push_back("fewer than 2 options");
    char expected = 'A';
    for (const auto& [letter, text] : item.options) {
        if (letter.size() != 1 || letter[0] != expected) {
            out.push_back("option letters are not consecutive from A");
            break;
        }
        if (is_blank(text)) out.push_back("option " + letter + " is empty");
        ++expected;
    }
    if (!item.options.contains(item.gold)) out.push_back("gold '" + item.gold + "' is not an option");
    return out;
}

std::vector<std::string> eval_case_problems(const EvalCase& c) {
    std::vector<std::string> out;
    if (c.id.empty()) out.push_back("missing id");
    if (is_blank(c.case_material)) out.push_back("empty case material");
    auto in = [&](const auto& list) {
        return std::find(std::begin(list), std::end(list), c.group_key) != std::end(list);
    };
    if (c.source == EvalSource::cmd && !in(kCmdDepartments))
        out.push_back("cmd group_key '" + c.group_key + "' is not a known department");
    if (c.source == EvalSource::cmid && !in(kCmidIntents))
        out.push_back("cmid group_key '" + c.group_key + "' is not a known intent");
    return out;
}

double JudgeScore::average() const {
    return (proactivity + accuracy + helpfulness + linguistic_quality) / 4.0;
}

bool JudgeScore::in_range() const {
    for (double v : {proactivity, accuracy, helpfulness, linguistic_quality})
        if (!(v >= 1.0 && v <= 5.0)) return false;
    return true;
}

void validate_train_config(const TrainStageConfig& c) {
    if (c.stage != 1 && c.stage != 2) throw Error("stage must be 1 or 2");
    if (c.global_batch_size <= 0 || c.epochs <= 0 || c.max_seq_len <= 0)
        throw Error("batch size, epochs and max_seq_len must be positive");
    if (c.warmup_steps < 0) throw Error("warmup_steps must be non-negative");
    if (!(c.learning_rate > 0)) throw Error("learning_rate must be positive");
    if (c.weight_decay < 0) throw Error("weight_decay must be non-negative");
    if (c.optimizer.empty()) throw Error("optimizer is empty");
}

} // namespace forge

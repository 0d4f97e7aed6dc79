#include "forge/datamodel/serialize.hpp"

#include "forge/common/error.hpp"

namespace forge {

namespace {

template <class T>
void get_optional(const json& j, const char* key, std::optional<T>& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null())
        out = it->get<T>();
    else
        out.reset();
}

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

} // namespace

void to_json(json& j, const Turn& t) {
    j = json{{"role", to_string(t.role)}, {"content", t.content}};
    if (!t.meta.empty()) j["meta"] = t.meta;
}

void from_json(const json& j, Turn& t) {
    t.role = parse_role(j.at("role").get<std::string>());
    t.content = j.at("content").get<std::string>();
    t.meta = j.value("meta", std::map<std::string, std::string>{});
}

void to_json(json& j, const PipelineStep& s) {
    j = json{{"step_name", s.step_name},
             {"backend_id", s.backend_id},
             {"prompt_hash", s.prompt_hash},
             {"response_hash", s.response_hash},
             {"timestamp_ms", s.timestamp_ms}};
}

void from_json(const json& j, PipelineStep& s) {
    s.step_name = j.at("step_name").get<std::string>();
    s.backend_id = j.at("backend_id").get<std::string>();
    s.prompt_hash = j.at("prompt_hash").get<std::string>();
    s.response_hash = j.at("response_hash").get<std::string>();
    s.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
}

void to_json(json& j, const ProvenanceRecord& p) {
    j = json{{"pipeline_steps", p.pipeline_steps}, {"human_edited", p.human_edited}};
    put_optional(j, "origin_record_id", p.origin_record_id);
}

void from_json(const json& j, ProvenanceRecord& p) {
    get_optional(j, "origin_record_id", p.origin_record_id);
    p.pipeline_steps = j.value("pipeline_steps", std::vector<PipelineStep>{});
    p.human_edited = j.value("human_edited", false);
}

void to_json(json& j, const DialogueSample& s) {
    j = json{{"id", s.id},
             {"source", to_string(s.source)},
             {"turns", s.turns},
             {"stage_tag", to_string(s.stage_tag)},
             {"provenance", s.provenance}};
    put_optional(j, "department", s.department);
}

void from_json(const json& j, DialogueSample& s) {
    s.id = j.at("id").get<std::string>();
    s.source = parse_source(j.at("source").get<std::string>());
    get_optional(j, "department", s.department);
    s.turns = j.at("turns").get<std::vector<Turn>>();
    s.stage_tag = parse_stage_tag(j.at("stage_tag").get<std::string>());
    s.provenance = j.contains("provenance") ? j.at("provenance").get<ProvenanceRecord>() : ProvenanceRecord{};
}

void to_json(json& j, const Relation& r) { j = json{{"relation", r.relation}, {"object", r.object}}; }

void from_json(const json& j, Relation& r) {
    r.relation = j.at("relation").get<std::string>();
    r.object = j.at("object").get<std::string>();
}

void to_json(json& j, const DiseaseBundle& b) {
    j = json{{"disease_id", b.disease_id},
             {"disease", b.disease},
             {"department", b.department},
             {"relations", b.relations}};
}

void from_json(const json& j, DiseaseBundle& b) {
    b.disease_id = j.value("disease_id", std::string{});
    b.disease = j.at("disease").get<std::string>();
    b.department = j.at("department").get<std::string>();
    b.relations = j.at("relations").get<std::vector<Relation>>();
}

void to_json(json& j, const ManifestComponent& c) {
    std::vector<std::string> abilities;
    for (auto a : c.abilities) abilities.emplace_back(to_string(a));
    j = json{{"name", c.name},
             {"source", to_string(c.source)},
             {"target_size", c.target_size},
             {"stage_tag", to_string(c.stage_tag)},
             {"abilities", abilities}};
}

void from_json(const json& j, ManifestComponent& c) {
    c.name = j.at("name").get<std::string>();
    c.source = parse_source(j.at("source").get<std::string>());
    c.target_size = j.at("target_size").get<std::size_t>();
    c.stage_tag = parse_stage_tag(j.at("stage_tag").get<std::string>());
    c.abilities.clear();
    for (const auto& a : j.at("abilities")) c.abilities.insert(parse_ability(a.get<std::string>()));
}

void to_json(json& j, const DatasetManifest& m) {
    j = json{{"components", m.components}, {"seed", m.seed}};
}

void from_json(const json& j, DatasetManifest& m) {
    m.components = j.at("components").get<std::vector<ManifestComponent>>();
    m.seed = j.value("seed", std::uint64_t{0});
}

void to_json(json& j, const McqItem& m) {
    j = json{{"id", m.id},
             {"subset", to_string(m.subset)},
             {"question", m.question},
             {"options", m.options},
             {"gold", m.gold}};
    put_optional(j, "explanation", m.explanation);
}

void from_json(const json& j, McqItem& m) {
    m.id = j.at("id").get<std::string>();
    m.subset = parse_mcq_subset(j.at("subset").get<std::string>());
    m.question = j.at("question").get<std::string>();
    m.options = j.at("options").get<std::map<std::string, std::string>>();
    m.gold = j.at("gold").get<std::string>();
    get_optional(j, "explanation", m.explanation);
}

void to_json(json& j, const EvalCase& c) {
    j = json{{"id", c.id},
             {"source", to_string(c.source)},
             {"group_key", c.group_key},
             {"case_material", c.case_material}};
    put_optional(j, "opening_question", c.opening_question);
}

void from_json(const json& j, EvalCase& c) {
    c.id = j.at("id").get<std::string>();
    c.source = parse_eval_source(j.at("source").get<std::string>());
    c.group_key = j.value("group_key", std::string{});
    c.case_material = j.at("case_material").get<std::string>();
    get_optional(j, "opening_question", c.opening_question);
}

void to_json(json& j, const JudgeScore& s) {
    j = json{{"proactivity", s.proactivity},
             {"accuracy", s.accuracy},
             {"helpfulness", s.helpfulness},
             {"linguistic_quality", s.linguistic_quality}};
    put_optional(j, "rationale", s.rationale);
}

void from_json(const json& j, JudgeScore& s) {
    s.proactivity = j.at("proactivity").get<double>();
    s.accuracy = j.at("accuracy").get<double>();
    s.helpfulness = j.at("helpfulness").get<double>();
    s.linguistic_quality = j.at("linguistic_quality").get<double>();
    get_optional(j, "rationale", s.rationale);
}

void to_json(json& j, const TrainStageConfig& c) {
    j = json{{"stage", c.stage},
             {"global_batch_size", c.global_batch_size},
             {"learning_rate", c.learning_rate},
             {"optimizer", c.optimizer},
             {"epochs", c.epochs},
             {"max_seq_len", c.max_seq_len},
             {"warmup_steps", c.warmup_steps},
             {"weight_decay", c.weight_decay}};
}

void from_json(const json& j, TrainStageConfig& c) {
    c.stage = j.at("stage").get<int>();
    c.global_batch_size = j.at("global_batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.optimizer = j.at("optimizer").get<std::string>();
    c.epochs = j.at("epochs").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.warmup_steps = j.at("warmup_steps").get<int>();
    c.weight_decay = j.at("weight_decay").get<double>();
}

json distribution_to_json(const DepartmentDistribution& d) { return json{{"weights", d.weights()}}; }

DepartmentDistribution distribution_from_json(const json& j) {
    return DepartmentDistribution(j.at("weights").get<std::map<std::string, double>>());
}

} // namespace forge

#pragma once

// Canonical JSON forms. Objects are written with keys in sorted order and
// absent optionals omitted, so dump() of a serialized value is canonical.

#include <json.hpp>

#include "forge/datamodel/types.hpp"

namespace forge {

using json = nlohmann::json;

void to_json(json& j, const Turn& t);
void from_json(const json& j, Turn& t);
void to_json(json& j, const PipelineStep& s);
void from_json(const json& j, PipelineStep& s);
void to_json(json& j, const ProvenanceRecord& p);
void from_json(const json& j, ProvenanceRecord& p);
void to_json(json& j, const DialogueSample& s);
void from_json(const json& j, DialogueSample& s);
void to_json(json& j, const Relation& r);
void from_json(const json& j, Relation& r);
void to_json(json& j, const DiseaseBundle& b);
void from_json(const json& j, DiseaseBundle& b);
void to_json(json& j, const ManifestComponent& c);
void from_json(const json& j, ManifestComponent& c);
void to_json(json& j, const DatasetManifest& m);
void from_json(const json& j, DatasetManifest& m);
void to_json(json& j, const McqItem& m);
void from_json(const json& j, McqItem& m);
void to_json(json& j, const EvalCase& c);
void from_json(const json& j, EvalCase& c);
void to_json(json& j, const JudgeScore& s);
void from_json(const json& j, JudgeScore& s);
void to_json(json& j, const TrainStageConfig& c);
void from_json(const json& j, TrainStageConfig& c);

json distribution_to_json(const DepartmentDistribution& d);
DepartmentDistribution distribution_from_json(const json& j);

} // namespace forge

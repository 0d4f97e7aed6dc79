#pragma once

// Knowledge-graph driven QA generation: disease bundles are sampled to
// follow a department distribution, turned into <instruction, knowledge>
// pairs, then into single-turn consultations.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/common/clock.hpp"
#include "forge/datamodel/taxonomy.hpp"
#include "forge/datamodel/types.hpp"
#include "forge/gateway/gateway.hpp"
#include "forge/sampling/sampler.hpp"

namespace forge::kgqa {

struct DanglingEdge {
    std::string src;
    std::string relation;
    std::string dst;
    std::string reason;
};

/// Node records: {"kind":"node","id","name","type","department"} where
/// department (a label or label list) matters only for diseases.
/// Edge records: {"kind":"edge","src","relation","dst"}, or "value" in
/// place of "dst" for literal attributes.
struct KnowledgeGraph {
    std::vector<DiseaseBundle> bundles;     // diseases with a resolved department
    std::vector<std::string> unassigned;    // disease ids without a usable department
    std::vector<DanglingEdge> dangling;     // edges that could not be attached
    std::size_t node_count = 0;
    std::size_t edge_count = 0;

    std::size_t relation_count() const;
};

/// With a taxonomy, department labels must resolve to a leaf; otherwise
/// they are used as given. Bundles are ordered by disease id.
KnowledgeGraph build_kg(const std::vector<nlohmann::json>& records, const DepartmentTaxonomy* taxonomy = nullptr);
KnowledgeGraph load_kg(const std::filesystem::path& path, const DepartmentTaxonomy* taxonomy = nullptr);

struct BundleSamplingOptions {
    /// Relations drawn (without replacement) from a disease per sample.
    std::size_t relations_per_sample = 3;
    /// A disease may be drawn this many times in one run, each time with
    /// its own relation subset.
    std::size_t max_uses_per_disease = 8;
};

struct ShortfallWarning {
    std::string department;
    std::size_t requested = 0;
    std::size_t available = 0;
};

struct SampledBundles {
    std::vector<DiseaseBundle> bundles;  // disease_id gains a "#<use>" suffix
    sampling::SamplePlan requested_plan;
    sampling::SamplePlan effective_plan;
    std::vector<ShortfallWarning> warnings;
};

/// Stratified draw of `total` bundles. A department whose capacity
/// (diseases with relations x max uses) is below its quota is capped, and
/// the deficit moves to departments with spare capacity in proportion to
/// their weights. Throws ShortfallError when the whole graph is too small.
SampledBundles sample_bundles(const KnowledgeGraph& graph, const DepartmentDistribution& dist, std::size_t total,
                              std::uint64_t seed, const BundleSamplingOptions& options = {});

struct QaPair {
    std::string instruction;
    std::string knowledge;
};

/// Prompt for step 1; the bundle travels in a `knowledge` input block as
/// "disease: <name>" followed by "<relation>: <object>" lines. Throws
/// PreconditionError for a bundle without relations.
gateway::ChatRequest build_step1_prompt(const DiseaseBundle& bundle, const std::string& backend_id);
/// Prompt for step 2; the pair travels in a `qa` input block.
gateway::ChatRequest build_step2_prompt(const QaPair& pair, const std::string& backend_id);

struct KgqaOptions {
    std::string backend_id;
    std::size_t workers = 4;
    Clock clock = system_clock_ms();
};

struct StepOutcome {
    std::optional<QaPair> pair;
    std::optional<DialogueSample> sample;
    std::string failed_step;  // empty on success
    std::string reason;
    std::string raw_response;
};

/// Runs both steps for one bundle. Each step retries once on an
/// unparseable reply; a second failure stops the item.
StepOutcome generate_one(const DiseaseBundle& bundle, gateway::Gateway& gw, const KgqaOptions& options);

struct QuarantinedBundle {
    std::string bundle_id;
    std::string step;
    std::string reason;
    std::string raw_response;
};

struct KgqaBatch {
    std::vector<DialogueSample> samples;
    std::vector<QuarantinedBundle> quarantine;
};

KgqaBatch generate_all(const std::vector<DiseaseBundle>& bundles, gateway::Gateway& gw, const KgqaOptions& options);

/// Counts, dangling edges, unassigned diseases, plan, warnings, quarantine.
nlohmann::json generation_report(const KnowledgeGraph& graph, const SampledBundles& sampled, const KgqaBatch& batch);

} // namespace forge::kgqa

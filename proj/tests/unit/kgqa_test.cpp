#include <gtest/gtest.h>

#include <random>
#include <set>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/datamodel/validate.hpp"
#include "forge/gateway/backend.hpp"
#include "forge/kgqa/kgqa.hpp"
#include "generators.hpp"

using namespace forge;
using namespace forge::kgqa;
using nlohmann::json;

namespace {

std::vector<json> tiny_graph() {
    return {
        {{"kind", "node"}, {"id", "d1"}, {"name", "asthma"}, {"type", "disease"}, {"department", "respiratory"}},
        {{"kind", "node"}, {"id", "d2"}, {"name", "gout"}, {"type", "disease"}, {"department", "rheumatology"}},
        {{"kind", "node"}, {"id", "d3"}, {"name", "otitis"}, {"type", "disease"}, {"department", "ent"}},
        {{"kind", "node"}, {"id", "s1"}, {"name", "wheezing"}, {"type", "symptom"}},
        {{"kind", "node"}, {"id", "m1"}, {"name", "salbutamol"}, {"type", "medication"}},
        {{"kind", "node"}, {"id", "m2"}, {"name", "colchicine"}, {"type", "medication"}},
        {{"kind", "edge"}, {"src", "d1"}, {"relation", "symptom"}, {"dst", "s1"}},
        {{"kind", "edge"}, {"src", "d1"}, {"relation", "medication"}, {"dst", "m1"}},
        {{"kind", "edge"}, {"src", "d2"}, {"relation", "medication"}, {"dst", "m2"}},
        {{"kind", "edge"}, {"src", "d2"}, {"relation", "attribute"}, {"value", "more common in men"}},
        {{"kind", "edge"}, {"src", "d3"}, {"relation", "symptom"}, {"dst", "s1"}},
    };
}

const std::vector<std::string> kDepartments{"d_a", "d_b", "d_c", "d_d", "d_e", "d_f", "d_g", "d_h", "d_i", "d_j"};

gateway::BackendConfig mock(std::string id) {
    gateway::BackendConfig c;
    c.backend_id = std::move(id);
    return c;
}

KgqaOptions opts(std::string backend) { return {std::move(backend), 4, fixed_clock(7)}; }

} // namespace

TEST(KgLoad, SmallGraph) {
    auto g = build_kg(tiny_graph());
    EXPECT_EQ(g.bundles.size(), 3u);
    EXPECT_EQ(g.relation_count(), 5u);
    EXPECT_TRUE(g.dangling.empty());
    EXPECT_EQ(g.bundles[1].relations[1].object, "more common in men");
}

TEST(KgLoad, DanglingAndUnassigned) {
    auto records = tiny_graph();
    records.push_back({{"kind", "edge"}, {"src", "d1"}, {"relation", "symptom"}, {"dst", "ghost"}});
    records.push_back({{"kind", "edge"}, {"src", "s1"}, {"relation", "symptom"}, {"dst", "m1"}});
    records.push_back({{"kind", "edge"}, {"src", "d1"}, {"relation", "likes"}, {"dst", "m1"}});
    records.push_back({{"kind", "node"}, {"id", "d4"}, {"name", "mystery"}, {"type", "disease"}});
    auto g = build_kg(records);
    ASSERT_EQ(g.dangling.size(), 3u);
    EXPECT_EQ(g.dangling[0].reason, "unknown target node");
    EXPECT_EQ(g.dangling[1].reason, "source is not a disease");
    EXPECT_EQ(g.dangling[2].reason, "unknown relation");
    EXPECT_EQ(g.unassigned, (std::vector<std::string>{"d4"}));
    EXPECT_EQ(g.bundles.size(), 3u);

    records.push_back({{"kind", "node"}, {"id", "d4"}, {"name", "again"}, {"type", "disease"}});
    EXPECT_THROW(build_kg(records), Error);
}

TEST(KgLoad, TaxonomyResolution) {
    auto records = tiny_graph();
    records[0]["department"] = json::array({"internal", "respiratory"});
    DepartmentTaxonomy tax({"respiratory", "rheumatology"}, {{"respiratory", "internal"}, {"rheumatology", "internal"}});
    auto g = build_kg(records, &tax);
    EXPECT_EQ(g.bundles.size(), 2u);
    EXPECT_EQ(g.bundles[0].department, "respiratory");
    EXPECT_EQ(g.unassigned, (std::vector<std::string>{"d3"}));
}

TEST(KgLoad, SyntheticTallyMatchesGenerator) {
    auto kg = testkit::synthetic_kg(11, 200, kDepartments);
    auto dir = testkit::scratch_dir("kg");
    write_jsonl(dir / "kg.jsonl", kg.records);
    auto g = load_kg(dir / "kg.jsonl");
    std::map<std::string, std::size_t> tally;
    for (const auto& b : g.bundles) ++tally[b.department];
    EXPECT_EQ(tally, kg.diseases_per_department);
    EXPECT_EQ(g.relation_count(), kg.relations);
}

TEST(KgSample, SingleDepartmentAndZero) {
    std::vector<json> records;
    for (int i = 0; i < 10; ++i) {
        records.push_back({{"kind", "node"}, {"id", "x" + std::to_string(i)}, {"name", "n"}, {"type", "disease"}, {"department", "A"}});
        records.push_back({{"kind", "edge"}, {"src", "x" + std::to_string(i)}, {"relation", "attribute"}, {"value", "v"}});
    }
    auto g = build_kg(records);
    DepartmentDistribution only_a({{"A", 1.0}});
    auto s = sample_bundles(g, only_a, 5, 3);
    ASSERT_EQ(s.bundles.size(), 5u);
    for (const auto& b : s.bundles) EXPECT_EQ(b.department, "A");
    std::set<std::string> distinct_diseases;
    for (const auto& b : s.bundles) distinct_diseases.insert(b.disease_id);
    EXPECT_EQ(distinct_diseases.size(), 5u);
    EXPECT_TRUE(sample_bundles(g, only_a, 0, 3).bundles.empty());
}

TEST(KgSample, ShortfallIsRedistributedWithWarning) {
    std::vector<json> records;
    auto add = [&](const std::string& id, const std::string& dept) {
        records.push_back({{"kind", "node"}, {"id", id}, {"name", id}, {"type", "disease"}, {"department", dept}});
        records.push_back({{"kind", "edge"}, {"src", id}, {"relation", "attribute"}, {"value", "v"}});
    };
    add("a0", "A");
    for (int i = 0; i < 10; ++i) add("b" + std::to_string(i), "B");
    auto g = build_kg(records);
    DepartmentDistribution half({{"A", 0.5}, {"B", 0.5}});
    auto s = sample_bundles(g, half, 40, 1, {3, 8});
    EXPECT_EQ(s.bundles.size(), 40u);
    EXPECT_EQ(s.effective_plan.per_department_counts.at("A"), 8u);
    EXPECT_EQ(s.effective_plan.per_department_counts.at("B"), 32u);
    ASSERT_EQ(s.warnings.size(), 1u);
    EXPECT_EQ(s.warnings[0].department, "A");
    EXPECT_EQ(s.warnings[0].requested, 20u);
    EXPECT_THROW(sample_bundles(g, half, 89, 1, {3, 8}), ShortfallError);
}

TEST(KgSample, DistributionFidelityAtScale) {
    // Same triangular skew as the synthetic graph, so every stratum has capacity.
    std::vector<double> truth;
    for (std::size_t k = 0; k < kDepartments.size(); ++k) truth.push_back(static_cast<double>(k + 1) / 55.0);
    std::mt19937_64 gen(77);
    std::discrete_distribution<std::size_t> pick(truth.begin(), truth.end());
    std::vector<std::string> corpus;
    for (int i = 0; i < 20000; ++i) corpus.push_back(kDepartments[pick(gen)]);
    auto dist = sampling::extract_department_distribution(corpus, DepartmentTaxonomy::flat(kDepartments));
    auto g = build_kg(testkit::synthetic_kg(5, 2000, kDepartments).records);
    auto s = sample_bundles(g, dist, 5000, 99);
    ASSERT_EQ(s.bundles.size(), 5000u);
    std::map<std::string, double> freq;
    for (const auto& b : s.bundles) freq[b.department] += 1.0 / 5000;
    EXPECT_LE(sampling::total_variation(freq, dist.weights()), 0.05);
    EXPECT_TRUE(s.warnings.empty());

    auto again = sample_bundles(g, dist, 5000, 99);
    EXPECT_EQ(again.bundles, s.bundles);
    std::set<std::string> ids;
    for (const auto& b : s.bundles) {
        ASSERT_TRUE(ids.insert(b.disease_id).second);
        ASSERT_LE(b.relations.size(), 3u);
        ASSERT_FALSE(b.relations.empty());
    }
}

TEST(KgGenerate, StepOneUnderMock) {
    gateway::Gateway gw;
    gw.register_backend(mock("m1"));
    DiseaseBundle b{"d1", "asthma", "respiratory", {{"symptom", "wheezing"}}};
    auto out = generate_one(b, gw, opts("m1"));
    ASSERT_TRUE(out.pair);
    EXPECT_NE(out.pair->instruction.find("asthma"), std::string::npos);
    EXPECT_NE(out.pair->knowledge.find("wheezing"), std::string::npos);
}

TEST(KgGenerate, EmptyBundleRejectedBeforeAnyCall) {
    gateway::Gateway gw;
    std::atomic<int> calls{0};
    gw.register_backend(mock("m"), std::make_unique<gateway::FunctionBackend>([&](const gateway::ChatRequest& q) {
        ++calls;
        return gateway::make_stop_response("x", q);
    }));
    DiseaseBundle empty{"d0", "nothing", "A", {}};
    EXPECT_THROW(generate_one(empty, gw, opts("m")), PreconditionError);
    EXPECT_EQ(calls.load(), 0);
}

TEST(KgGenerate, PromptFactsComeFromTheBundle) {
    auto g = build_kg(testkit::synthetic_kg(3, 50, kDepartments).records);
    for (const auto& b : g.bundles) {
        auto req = build_step1_prompt(b, "m");
        auto block = extract_input_block(req.messages.back().content, "knowledge");
        ASSERT_TRUE(block);
        auto lines = split_lines(*block);
        ASSERT_EQ(lines.size(), b.relations.size() + 1);
        EXPECT_EQ(lines[0], "disease: " + b.disease);
        for (std::size_t i = 1; i < lines.size(); ++i) {
            bool found = false;
            for (const auto& r : b.relations) found |= lines[i] == r.relation + ": " + r.object;
            EXPECT_TRUE(found) << lines[i];
        }
    }
}

TEST(KgGenerate, HundredBundlesUnderMock) {
    auto g = build_kg(testkit::synthetic_kg(8, 300, kDepartments).records);
    auto dist = DepartmentDistribution::from_counts({{"d_a", 1}, {"d_e", 2}, {"d_j", 3}});
    auto sampled = sample_bundles(g, dist, 100, 4);
    gateway::Gateway gw;
    gw.register_backend(mock("m1"));
    auto batch = generate_all(sampled.bundles, gw, opts("m1"));
    ASSERT_EQ(batch.samples.size(), 100u);
    EXPECT_TRUE(batch.quarantine.empty());
    std::map<std::string, std::size_t> tally;
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        const auto& s = batch.samples[i];
        ASSERT_TRUE(validate_sample(s).empty());
        ASSERT_EQ(s.turns.size(), 2u);
        ASSERT_EQ(s.source, Source::kgqa);
        ASSERT_EQ(s.stage_tag, StageTag::stage1);
        ASSERT_EQ(s.provenance.pipeline_steps.size(), 2u);
        EXPECT_EQ(s.provenance.pipeline_steps[0].step_name, "kgqa_step1");
        EXPECT_EQ(s.provenance.pipeline_steps[1].step_name, "kgqa_step2");
        for (const auto& r : sampled.bundles[i].relations)
            EXPECT_NE(s.turns[1].content.find(r.object), std::string::npos);
        ++tally[*s.department];
    }
    EXPECT_EQ(tally, (std::map<std::string, std::size_t>(sampled.effective_plan.per_department_counts.begin(),
                                                          sampled.effective_plan.per_department_counts.end())));
    auto report = generation_report(g, sampled, batch);
    EXPECT_EQ(report["emitted"].get<std::size_t>() + report["quarantined"].size(), 100u);
}

TEST(KgGenerate, UnparseableStepTwoIsQuarantined) {
    gateway::Gateway gw;
    gateway::MockBackend real;
    gw.register_backend(mock("m"), std::make_unique<gateway::FunctionBackend>([&](const gateway::ChatRequest& q) {
        if (q.request_tag == "kgqa_step2") return gateway::make_stop_response("Sorry.", q);
        return real.complete(q);
    }));
    std::vector<DiseaseBundle> bundles{{"d1", "asthma", "resp", {{"symptom", "wheezing"}}}};
    auto batch = generate_all(bundles, gw, opts("m"));
    EXPECT_TRUE(batch.samples.empty());
    ASSERT_EQ(batch.quarantine.size(), 1u);
    EXPECT_EQ(batch.quarantine[0].step, "kgqa_step2");
    EXPECT_EQ(batch.quarantine[0].raw_response, "Sorry.");
}

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "forge/common/error.hpp"
#include "forge/common/numeric.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/datamodel/dataset_io.hpp"
#include "forge/datamodel/validate.hpp"
#include "forge/gateway/backend.hpp"
#include "forge/reconstruct/reconstruct.hpp"
#include "generators.hpp"

using namespace forge;
using namespace forge::reconstruct;
using gateway::ChatRequest;

namespace {

RawRecord make_record(std::string id, std::vector<RawTurn> turns) {
    RawRecord r;
    r.id = std::move(id);
    r.turns = std::move(turns);
    return r;
}

RawRecord four_turns() {
    return make_record("r1", {{"patient", "My child has a fever since yesterday."},
                              {"doctor", "Emm, how high is it lol?"},
                              {"patient", "About 39 degrees."},
                              {"doctor", "Give ibuprofen and please register for an appointment at our clinic."}});
}

std::vector<RawRecord> synthetic_corpus(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::vector<RawRecord> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(raw_record_from_json(testkit::random_raw_record_json(gen, "rec" + std::to_string(i), 1 + gen() % 4)));
    return out;
}

gateway::BackendConfig mock(std::string id) {
    gateway::BackendConfig c;
    c.backend_id = std::move(id);
    return c;
}

struct ThrowingDetector : EntityDetector {
    std::vector<Entity> detect(std::string_view text) const override {
        if (text.find("boom") != std::string_view::npos) throw std::runtime_error("model crashed");
        return {{"fever", "symptom"}};
    }
};

} // namespace

TEST(RawRecords, JsonFormsAndDepartmentResolution) {
    auto r = raw_record_from_json(nlohmann::json::parse(
        R"({"id":"a","source":"meddialog","department":["internal","respiratory"],"turns":[{"speaker":"病人","text":"x"}]})"));
    EXPECT_EQ(r.department_path.size(), 2u);
    EXPECT_FALSE(r.department);
    std::vector<RawRecord> v{r};
    resolve_departments(v, DepartmentTaxonomy({"respiratory"}, {{"respiratory", "internal"}}));
    EXPECT_EQ(v[0].department, "respiratory");
    EXPECT_EQ(raw_record_from_json(to_json(v[0])).department_path, r.department_path);
    EXPECT_THROW(resolve_departments(v, DepartmentTaxonomy::flat({"cardiology"})), IngestError);
    EXPECT_THROW(raw_record_from_json(nlohmann::json::parse(R"({"id":"a","source":"kgqa","turns":[{"speaker":"p","text":"x"}]})")),
                 Error);
    EXPECT_THROW(raw_record_from_json(nlohmann::json::parse(R"({"id":"a","source":"meddialog","turns":[]})")), Error);
}

TEST(RawRecords, NormalizationMergesAndTrims) {
    auto r = make_record("n", {{"医生", "hello"},
                               {"患者", "one"},
                               {"patient", "two"},
                               {"doctor", "reply"},
                               {"doctor", "more"},
                               {"patient", "bye"}});
    auto turns = normalize_turns(r);
    ASSERT_EQ(turns.size(), 2u);
    EXPECT_EQ(turns[0].content, "one\ntwo");
    EXPECT_EQ(turns[1].content, "reply\nmore");
    EXPECT_TRUE(normalize_turns(make_record("u", {{"nurse", "hi"}, {"doctor", "x"}})).empty());
}

TEST(Filter, BlockedKeywordRejectedWithRuleId) {
    std::vector<FilterRule> rules{{"no-fees", FilterKind::keyword_block, {"Appointment"}, 0}};
    auto out = filter_records({four_turns()}, rules);
    EXPECT_TRUE(out.kept.empty());
    ASSERT_EQ(out.rejected.size(), 1u);
    EXPECT_EQ(out.rejected[0].rule_id, "no-fees");
}

TEST(Filter, EmptyRuleSetKeepsEverything) {
    auto corpus = synthetic_corpus(50, 1);
    auto out = filter_records(corpus, {});
    EXPECT_EQ(out.kept, corpus);
    EXPECT_TRUE(out.rejected.empty());
}

TEST(Filter, SeededViolationsAreCountedExactly) {
    std::mt19937_64 gen(123);
    auto corpus = synthetic_corpus(1000, 7);
    std::vector<std::size_t> idx(corpus.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), gen);
    const std::vector<std::string> blocked{"wechat me", "pay the fee", "加微信"};
    for (std::size_t k = 0; k < 300; ++k) {
        auto& rec = corpus[idx[k]];
        auto& turn = rec.turns[gen() % rec.turns.size()];
        turn.text += " " + blocked[k % blocked.size()];
    }
    std::vector<FilterRule> rules{{"contact", FilterKind::keyword_block, blocked, 0}};
    auto out = filter_records(corpus, rules);
    EXPECT_EQ(out.kept.size(), 700u);
    EXPECT_EQ(out.rejected.size(), 300u);
}

TEST(Filter, StablePartitionUnderPermutation) {
    auto corpus = synthetic_corpus(300, 9);
    std::vector<FilterRule> rules{{"min", FilterKind::min_turns, {}, 4}, {"max", FilterKind::max_turns, {}, 6}};
    auto base = filter_records(corpus, rules);
    std::mt19937_64 gen(4);
    auto permuted = corpus;
    std::shuffle(permuted.begin(), permuted.end(), gen);
    auto moved = filter_records(permuted, rules);
    std::vector<RawRecord> expected_kept;
    for (const auto& r : permuted)
        if (std::find(base.kept.begin(), base.kept.end(), r) != base.kept.end()) expected_kept.push_back(r);
    EXPECT_EQ(moved.kept, expected_kept);
    EXPECT_EQ(moved.kept.size() + moved.rejected.size(), corpus.size());
    for (const auto& rej : moved.rejected) EXPECT_TRUE(rej.rule_id == "min" || rej.rule_id == "max");
}

TEST(Filter, FirstFailingRuleIsReported) {
    std::vector<FilterRule> rules{{"min", FilterKind::min_turns, {}, 10}, {"kw", FilterKind::keyword_block, {"fever"}, 0}};
    auto out = filter_records({four_turns()}, rules);
    ASSERT_EQ(out.rejected.size(), 1u);
    EXPECT_EQ(out.rejected[0].rule_id, "min");
}

TEST(Filter, EntityRulesAndHookFailures) {
    GazetteerEntityDetector gaz({{"symptom", {"fever"}}}, {{"drug", {"[a-z]+profen"}}});
    auto ents = gaz.detect("Fever, so take Ibuprofen");
    ASSERT_EQ(ents.size(), 2u);
    EXPECT_EQ(ents[1].text, "Ibuprofen");

    std::vector<FilterRule> need_drug{{"drug", FilterKind::entity_require, {"drug"}, 0}};
    auto plain = make_record("p", {{"patient", "hello"}, {"doctor", "hi"}});
    auto out = filter_records({four_turns(), plain}, need_drug, &gaz);
    EXPECT_EQ(out.kept.size(), 1u);
    EXPECT_EQ(out.rejected.at(0).record.id, "p");

    ThrowingDetector bad;
    auto crash = make_record("c", {{"patient", "boom"}, {"doctor", "x"}});
    std::vector<FilterRule> need_symptom{{"sym", FilterKind::entity_require, {"symptom"}, 0}};
    out = filter_records({crash, plain}, need_symptom, &bad);
    ASSERT_EQ(out.rejected.size(), 1u);
    EXPECT_NE(out.rejected[0].reason.find("entity detector failed"), std::string::npos);
    EXPECT_EQ(out.kept.size(), 1u);
}

TEST(Filter, MalformedRulesRejected) {
    EXPECT_THROW(validate_rules({{"a", FilterKind::keyword_block, {}, 0}}, false), ConfigError);
    EXPECT_THROW(validate_rules({{"a", FilterKind::entity_require, {"x"}, 0}}, false), ConfigError);
    EXPECT_THROW(validate_rules({{"a", FilterKind::min_turns, {}, 1}, {"a", FilterKind::max_turns, {}, 3}}, false),
                 ConfigError);
    auto rules = filter_rules_from_json(nlohmann::json::parse(
        R"({"rules":[{"id":"k","kind":"keyword_require","keywords":["a"]},{"id":"m","kind":"min_turns","value":2}]})"));
    ASSERT_EQ(rules.size(), 2u);
    EXPECT_EQ(rules[1].bound, 2u);
    EXPECT_THROW(filter_rules_from_json(nlohmann::json::parse(R"([{"id":"k","kind":"regex"}])")), ConfigError);
}

TEST(Prompt, CarriesRulesDialogueAndFormat) {
    auto req = build_rewrite_prompt(four_turns(), "m1");
    const auto& user = req.messages.back().content;
    auto block = extract_input_block(user, "dialogue");
    ASSERT_TRUE(block);
    const std::string_view tags[] = {"patient", "doctor"};
    auto turns = parse_tagged(*block, tags, false);
    ASSERT_TRUE(turns);
    EXPECT_EQ(turns->size(), 4u);
    EXPECT_NE(block->find("please register for an appointment"), std::string::npos);
    for (const auto& rule : rewrite_rules()) EXPECT_NE(user.find(rule), std::string::npos);
    EXPECT_EQ(rewrite_rules().size(), 3u);
    EXPECT_NE(user.find("[END]"), std::string::npos);
    EXPECT_EQ(req.request_tag, "reconstruct");
    EXPECT_EQ(gateway::request_digest(req), gateway::request_digest(build_rewrite_prompt(four_turns(), "m1")));
}

TEST(Reconstruct, MockRewriteYieldsValidSample) {
    gateway::Gateway gw;
    gw.register_backend(mock("m1"));
    auto rec = four_turns();
    rec.department = "pediatrics";
    auto res = reconstruct::reconstruct(rec, gw, {"m1", 1, fixed_clock(1000)});
    ASSERT_TRUE(res.sample);
    const auto& s = *res.sample;
    EXPECT_TRUE(validate_sample(s).empty());
    EXPECT_FALSE(s.provenance.human_edited);
    EXPECT_EQ(s.provenance.origin_record_id, "r1");
    ASSERT_EQ(s.provenance.pipeline_steps.size(), 1u);
    EXPECT_EQ(s.provenance.pipeline_steps[0].step_name, "reconstruct");
    EXPECT_EQ(s.department, "pediatrics");
    EXPECT_EQ(s.source, Source::meddialog);
    EXPECT_EQ(s.turns[0].content, rec.turns[0].text);
    EXPECT_EQ(s.turns[2].content, rec.turns[2].text);
}

TEST(Reconstruct, MalformedTwiceIsQuarantined) {
    gateway::Gateway gw;
    std::atomic<int> calls{0};
    gw.register_backend(mock("bad"), std::make_unique<gateway::FunctionBackend>([&](const ChatRequest& q) {
        ++calls;
        return gateway::make_stop_response("I cannot help with that.", q);
    }));
    auto res = reconstruct::reconstruct(four_turns(), gw, {"bad", 1, fixed_clock(0)});
    EXPECT_FALSE(res.sample);
    ASSERT_TRUE(res.quarantine);
    EXPECT_EQ(res.quarantine->record_id, "r1");
    EXPECT_EQ(res.quarantine->raw_response, "I cannot help with that.");
    EXPECT_EQ(res.quarantine->attempts, 2u);
    EXPECT_EQ(calls.load(), 2);
}

TEST(Reconstruct, RetryWithFormatReminderRecovers) {
    gateway::Gateway gw;
    gw.register_backend(mock("flaky"), std::make_unique<gateway::FunctionBackend>([](const ChatRequest& q) {
        if (q.messages.size() < 3) return gateway::make_stop_response("[patient] only one\n[END]", q);
        return gateway::make_stop_response(
            "[patient] a\n[doctor] How high is the fever?\n[patient] b\n[doctor] Ibuprofen can help; see a clinician if it persists.\n[END]", q);
    }));
    auto res = reconstruct::reconstruct(four_turns(), gw, {"flaky", 1, fixed_clock(0)});
    ASSERT_TRUE(res.sample);
    EXPECT_EQ(res.sample->turns[1].content, "How high is the fever?");
    EXPECT_EQ(res.sample->turns[0].content, four_turns().turns[0].text);
}

TEST(Reconstruct, MockCorpusIsValidAndDeterministic) {
    auto corpus = synthetic_corpus(200, 31);
    auto run = [&] {
        gateway::Gateway gw;
        gw.register_backend(mock("m1"));
        return reconstruct_all(corpus, gw, {"m1", 4, fixed_clock(5)});
    };
    auto a = run();
    auto b = run();
    ASSERT_EQ(a.samples.size(), 200u);
    EXPECT_TRUE(a.quarantine.empty());
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        ASSERT_TRUE(validate_sample(a.samples[i]).empty());
        ASSERT_EQ(a.samples[i].provenance.origin_record_id, corpus[i].id);
        ASSERT_EQ(canonical_record(a.samples[i]), canonical_record(b.samples[i]));
    }
}

TEST(Fidelity, IdentityAndEmpty) {
    auto rec = four_turns();
    DialogueSample same;
    same.id = "x";
    for (const auto& t : normalize_turns(rec)) same.turns.push_back(t);
    auto rep = check_fidelity(rec, same, {"ibuprofen", "39"});
    EXPECT_TRUE(rep.patient_turns_equal);
    EXPECT_DOUBLE_EQ(*rep.doctor_length_ratio, 1.0);
    EXPECT_DOUBLE_EQ(*rep.term_retention, 1.0);

    auto emptied = same;
    for (auto& t : emptied.turns)
        if (t.role == Role::doctor) t.content.clear();
    rep = check_fidelity(rec, emptied, {"ibuprofen"});
    EXPECT_DOUBLE_EQ(*rep.term_retention, 0.0);
    EXPECT_DOUBLE_EQ(*rep.doctor_length_ratio, 0.0);
}

TEST(Fidelity, HalfOfMarkersDroppedGivesHalfRetention) {
    // Each doctor turn carries two markers; the backend keeps only the first.
    std::vector<RawRecord> corpus;
    std::vector<std::string> markers;
    for (int i = 0; i < 200; ++i) {
        std::string a = "MKA" + std::to_string(i), b = "MKB" + std::to_string(i);
        markers.push_back(a);
        markers.push_back(b);
        corpus.push_back(make_record("f" + std::to_string(i),
                                     {{"patient", "symptom report " + std::to_string(i)}, {"doctor", "Consider " + a + " and " + b + "."}}));
    }
    gateway::Gateway gw;
    gw.register_backend(mock("drop"), std::make_unique<gateway::FunctionBackend>([](const ChatRequest& q) {
        const std::string_view tags[] = {"patient", "doctor"};
        auto turns = *parse_tagged(*extract_input_block(q.messages.back().content, "dialogue"), tags, false);
        for (auto& t : turns)
            if (t.tag == "doctor") t.text = t.text.substr(0, t.text.find(" and "));
        return gateway::make_stop_response(render_tagged(turns), q);
    }));
    auto batch = reconstruct_all(corpus, gw, {"drop", 4, fixed_clock(0)});
    ASSERT_EQ(batch.samples.size(), corpus.size());
    std::vector<double> retention;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        retention.push_back(*check_fidelity(corpus[i], batch.samples[i], markers).term_retention);
    EXPECT_NEAR(stable_mean(retention), 0.5, 0.02);
}

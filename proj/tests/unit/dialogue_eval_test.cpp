#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include "forge/common/digest.hpp"
#include "forge/common/numeric.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/dialogue_eval/dialogue_eval.hpp"
#include "forge/gateway/backend.hpp"
#include "generators.hpp"

using namespace forge;
using namespace forge::dialogue_eval;
using nlohmann::json;

namespace {

gateway::BackendConfig config(std::string id) {
    gateway::BackendConfig c;
    c.backend_id = std::move(id);
    c.max_retries = 0;
    c.requests_per_minute = 1000000;
    return c;
}

gateway::ChatResponse reply(const std::string& text, const gateway::ChatRequest& r) {
    return gateway::make_stop_response(text, r);
}

void register_replying(gateway::Gateway& gw, const std::string& id, std::vector<std::string> replies) {
    auto calls = std::make_shared<std::size_t>(0);
    gw.register_backend(config(id), std::make_unique<gateway::FunctionBackend>(
                                        [replies, calls](const gateway::ChatRequest& r) {
                                            return reply(replies[std::min((*calls)++, replies.size() - 1)], r);
                                        }));
}

JudgeScore js(double p, double a, double h, double l) { return {p, a, h, l, std::nullopt}; }

// Exact rational of a double, for a rounding-free oracle.
boost::multiprecision::cpp_rational exact(double v) {
    int exp = 0;
    const double mant = std::frexp(v, &exp);
    const auto scaled = static_cast<long long>(std::ldexp(mant, 53));
    boost::multiprecision::cpp_rational r(scaled);
    exp -= 53;
    boost::multiprecision::cpp_int pow2 = 1;
    pow2 <<= std::abs(exp);
    if (exp >= 0) return r * pow2;
    return r / pow2;
}

} // namespace

TEST(EvalSet, ReferenceCountsAndStrata) {
    auto pools = testkit::synthetic_eval_pools(1, 73, 20, 30);
    auto cases = build_eval_set(pools.cmb, pools.cmd, pools.cmid, 5);
    ASSERT_EQ(cases.size(), 313u);
    std::map<std::string, std::size_t> groups;
    std::map<EvalSource, std::size_t> sources;
    for (const auto& c : cases) {
        ++sources[c.source];
        if (c.source != EvalSource::cmb_clin) ++groups[c.group_key];
        EXPECT_TRUE(eval_case_problems(c).empty());
    }
    EXPECT_EQ(sources[EvalSource::cmb_clin], 73u);
    EXPECT_EQ(sources[EvalSource::cmd], 120u);
    EXPECT_EQ(sources[EvalSource::cmid], 120u);
    for (auto d : kCmdDepartments) EXPECT_EQ(groups[std::string(d)], 20u);
    for (auto t : kCmidIntents) EXPECT_EQ(groups[std::string(t)], 30u);
}

TEST(EvalSet, DeterministicAndDrawsFromLargerPools) {
    auto pools = testkit::synthetic_eval_pools(2, 80, 50, 60);
    auto a = build_eval_set(pools.cmb, pools.cmd, pools.cmid, 9);
    EXPECT_EQ(a, build_eval_set(pools.cmb, pools.cmd, pools.cmid, 9));
    EXPECT_NE(a, build_eval_set(pools.cmb, pools.cmd, pools.cmid, 10));
    EXPECT_EQ(a.size(), 313u);
}

TEST(EvalSet, Shortfalls) {
    auto pools = testkit::synthetic_eval_pools(3, 73, 20, 30);
    std::erase_if(pools.cmd, [](const EvalCase& c) { return c.group_key == "andrology"; });
    try {
        build_eval_set(pools.cmb, pools.cmd, pools.cmid, 1);
        FAIL();
    } catch (const ShortfallError& e) {
        EXPECT_EQ(e.stratum(), "andrology");
        EXPECT_EQ(e.deficit(), 20u);
    }
    auto fresh = testkit::synthetic_eval_pools(3, 72, 20, 30);
    EXPECT_THROW(build_eval_set(fresh.cmb, fresh.cmd, fresh.cmid, 1), ShortfallError);
    auto swapped = testkit::synthetic_eval_pools(3, 73, 20, 30);
    EXPECT_THROW(build_eval_set(swapped.cmb, swapped.cmid, swapped.cmd, 1), PreconditionError);
}

TEST(Opening, MockAndPassThrough) {
    gateway::Gateway gw;
    gw.register_backend(config("p"));
    auto pools = testkit::synthetic_eval_pools(4, 73, 1, 1);
    std::size_t opened = 0;
    for (const auto& c : pools.cmb) {
        auto r = open_question(c, gw, "p");
        ASSERT_TRUE(std::holds_alternative<EvalCase>(r));
        const auto& got = std::get<EvalCase>(r);
        ASSERT_TRUE(got.opening_question);
        EXPECT_NE(got.opening_question->find(sha256_hex(trim(c.case_material)).substr(0, 8)), std::string::npos);
        ++opened;
    }
    EXPECT_EQ(opened, 73u);
    auto cmd = std::get<EvalCase>(open_question(pools.cmd[0], gw, "p"));
    EXPECT_EQ(cmd, pools.cmd[0]);
    EXPECT_EQ(opening_of(cmd), cmd.case_material);
    EXPECT_THROW(opening_of(pools.cmb[0]), PreconditionError);

    register_replying(gw, "bad", {"no tags here"});
    auto failed = open_question(pools.cmb[0], gw, "bad");
    ASSERT_TRUE(std::holds_alternative<OpeningFailure>(failed));
    EXPECT_EQ(std::get<OpeningFailure>(failed).raw_response, "no tags here");
}

TEST(Consultation, StructureUnderMocks) {
    gateway::Gateway gw;
    gw.register_backend(config("doc"));
    gw.register_backend(config("pat"));
    auto pools = testkit::synthetic_eval_pools(5, 1, 1, 1);
    auto c = std::get<EvalCase>(open_question(pools.cmb[0], gw, "pat"));

    auto t = run_consultation(c, gw, "pat", "doc");
    EXPECT_TRUE(t.complete);
    ASSERT_EQ(t.turns.size(), 6u);
    EXPECT_EQ(t.doctor_turns(), 3u);
    EXPECT_TRUE(transcript_problems(t, 3).empty());
    EXPECT_EQ(t.turns[0].content, *c.opening_question);
    EXPECT_EQ(t.patient_backend, "pat");
    EXPECT_EQ(t.doctor_backend, "doc");

    auto one = run_consultation(c, gw, "pat", "doc", 1);
    EXPECT_EQ(one.turns.size(), 2u);
    EXPECT_TRUE(transcript_problems(one, 1).empty());
    EXPECT_FALSE(transcript_problems(one, 3).empty());

    EXPECT_EQ(t, json(t).get<Transcript>());
}

TEST(Consultation, PromptsKeepRolesApart) {
    auto pools = testkit::synthetic_eval_pools(6, 1, 1, 1);
    auto c = pools.cmb[0];
    c.opening_question = "My chest hurts.";
    std::vector<Turn> history{{Role::patient, "My chest hurts.", {}}, {Role::doctor, "Since when?", {}}};
    auto doctor = build_doctor_request(history, "d");
    ASSERT_EQ(doctor.messages.size(), 2u);
    EXPECT_EQ(doctor.messages[0].role, gateway::MessageRole::user);
    for (const auto& m : doctor.messages) EXPECT_EQ(m.content.find(c.case_material), std::string::npos);
    auto patient = build_patient_request(c, history, "p");
    ASSERT_EQ(patient.messages.size(), 3u);
    EXPECT_EQ(extract_input_block(patient.messages[0].content, "case"), c.case_material);
    EXPECT_NE(patient.messages[0].content.find("Stay in character"), std::string::npos);
    EXPECT_EQ(patient.messages[1].role, gateway::MessageRole::assistant);
    EXPECT_EQ(patient.messages[2].role, gateway::MessageRole::user);
}

TEST(Consultation, BackendFailureLeavesPartialTranscript) {
    gateway::Gateway gw;
    gw.register_backend(config("pat"));
    auto calls = std::make_shared<int>(0);
    gw.register_backend(config("doc"), std::make_unique<gateway::FunctionBackend>([calls](const gateway::ChatRequest& r) {
                            if (++*calls == 2) throw gateway::TransportError("status 400", false);
                            return reply("Tell me more.", r);
                        }));
    auto pools = testkit::synthetic_eval_pools(7, 0, 1, 1);
    auto t = run_consultation(pools.cmd[0], gw, "pat", "doc");
    EXPECT_FALSE(t.complete);
    ASSERT_TRUE(t.failure);
    EXPECT_NE(t.failure->find("doctor backend failed"), std::string::npos);
    EXPECT_EQ(t.turns.size(), 3u);
    gateway::Gateway judge_gw;
    judge_gw.register_backend(config("j"));
    EXPECT_THROW(judge(t, judge_gw, "j"), PreconditionError);
}

TEST(Verdict, Parsing) {
    auto ok = parse_verdict("5 5 5 5");
    ASSERT_TRUE(std::holds_alternative<JudgeScore>(ok));
    EXPECT_EQ(std::get<JudgeScore>(ok), js(5, 5, 5, 5));
    EXPECT_EQ(std::get<JudgeScore>(ok).average(), 5.0);

    auto named = parse_verdict("Helpfulness: 3\nproactivity: 2\nLinguistic Quality: 5.\naccuracy = 4\nOverall: 9");
    ASSERT_TRUE(std::holds_alternative<JudgeScore>(named));
    EXPECT_EQ(std::get<JudgeScore>(named), js(2, 4, 3, 5));

    auto problem = [](const std::string& r) { return std::get<std::string>(parse_verdict(r)); };
    EXPECT_NE(problem("6 5 5 5").find("outside 1..5"), std::string::npos);
    EXPECT_NE(problem("proactivity: 4.5\naccuracy: 4\nhelpfulness: 4\nlinguistic_quality: 4").find("not an integer"),
              std::string::npos);
    EXPECT_NE(problem("proactivity: 4\naccuracy: 4\nhelpfulness: 4").find("linguistic_quality is missing"),
              std::string::npos);
    EXPECT_NE(problem("proactivity: 4\nproactivity: 3").find("twice"), std::string::npos);
    EXPECT_FALSE(problem("4 4 4").empty());
    EXPECT_FALSE(problem("").empty());
    EXPECT_NE(problem("proactivity: 0\naccuracy: 4\nhelpfulness: 4\nlinguistic_quality: 4").find("outside"),
              std::string::npos);
}

TEST(Verdict, JudgeRetriesOnceThenQuarantines) {
    Transcript t{"c1", "p", "d", {{Role::patient, "Hi", {}}, {Role::doctor, "Hello", {}}}, 1, true, std::nullopt};
    gateway::Gateway gw;
    register_replying(gw, "twice-bad", {"6 5 5 5"});
    auto bad = judge(t, gw, "twice-bad");
    EXPECT_FALSE(bad.score);
    EXPECT_NE(bad.problem.find("outside"), std::string::npos);
    register_replying(gw, "fixes", {"great job", "4 4 3 5"});
    auto fixed = judge(t, gw, "fixes");
    ASSERT_TRUE(fixed.score);
    EXPECT_EQ(*fixed.score, js(4, 4, 3, 5));

    auto req = build_judge_request(t, "j");
    const auto& system = req.messages[0].content;
    for (auto name : kMetricNames) EXPECT_NE(system.find(std::string(name) + ": "), std::string::npos);
    EXPECT_EQ(extract_input_block(req.messages[1].content, "transcript"), "patient: Hi\ndoctor: Hello");
    EXPECT_EQ(req.temperature, 0.0);
}

TEST(Aggregate, PublishedRowConvention) {
    auto row = row_from_means("gpt", {4.30, 4.53, 4.55, 5.00});
    EXPECT_EQ(format_half_up(row.overall, 2), "4.60");
    namespace mp = boost::multiprecision;
    mp::cpp_rational sum = exact(4.30) + exact(4.53) + exact(4.55) + exact(5.00);
    const mp::cpp_rational truth = sum / 4;
    // The computed mean must be the double nearest the exact mean of the inputs.
    const auto err = abs(exact(row.overall) - truth);
    EXPECT_LE(err, abs(exact(std::nextafter(row.overall, 10.0)) - truth));
    EXPECT_LE(err, abs(exact(std::nextafter(row.overall, 0.0)) - truth));

    auto single = aggregate({{"x", EvalSource::cmb_clin, "", js(3, 3, 3, 3)}}, GroupBy::none);
    ASSERT_EQ(single.rows.size(), 1u);
    for (double m : single.rows[0].means) EXPECT_EQ(m, 3.0);
    EXPECT_EQ(single.rows[0].overall, 3.0);
    EXPECT_THROW(aggregate({}, GroupBy::none), PreconditionError);
    EXPECT_THROW(aggregate({{"x", EvalSource::cmb_clin, "", js(3, 3, 3, 3)}}, GroupBy::department), PreconditionError);
}

TEST(Aggregate, GroupedMatchesNaiveRecomputation) {
    std::mt19937_64 gen(31);
    std::vector<ScoredCase> scored;
    for (std::size_t i = 0; i < 120; ++i) {
        auto d = std::string(kCmdDepartments[i % 6]);
        scored.push_back({"cmd-" + std::to_string(i), EvalSource::cmd, d,
                          js(1 + gen() % 5, 1 + gen() % 5, 1 + gen() % 5, 1 + gen() % 5)});
    }
    scored.push_back({"cmid-0", EvalSource::cmid, "others", js(1, 1, 1, 1)});
    auto agg = aggregate(scored, GroupBy::department);
    ASSERT_EQ(agg.rows.size(), 6u);

    std::map<std::string, std::array<double, 5>> naive;
    for (const auto& s : scored) {
        if (s.source != EvalSource::cmd) continue;
        auto& n = naive[s.group_key];
        n[0] += s.score.proactivity;
        n[1] += s.score.accuracy;
        n[2] += s.score.helpfulness;
        n[3] += s.score.linguistic_quality;
        n[4] += 1;
    }
    for (std::size_t r = 0; r < agg.rows.size(); ++r) {
        const auto& row = agg.rows[r];
        const auto& n = naive.at(row.group);
        double overall = 0;
        for (int i = 0; i < 4; ++i) {
            EXPECT_NEAR(row.means[i], n[i] / n[4], 1e-12) << row.group;
            overall += n[i] / n[4] / 4;
        }
        EXPECT_NEAR(row.overall, overall, 1e-12);
        EXPECT_EQ(row.cases, 20u);
        if (r > 0) {
            EXPECT_GE(agg.rows[r - 1].overall, row.overall);
        }
    }

    for (int k = 0; k < 20; ++k) {
        std::shuffle(scored.begin(), scored.end(), gen);
        auto again = aggregate(scored, GroupBy::department);
        for (std::size_t r = 0; r < agg.rows.size(); ++r) {
            EXPECT_EQ(again.rows[r].group, agg.rows[r].group);
            for (int i = 0; i < 4; ++i)
                EXPECT_EQ(std::bit_cast<std::uint64_t>(again.rows[r].means[i]),
                          std::bit_cast<std::uint64_t>(agg.rows[r].means[i]));
        }
    }
    auto intent = aggregate(scored, GroupBy::intent);
    ASSERT_EQ(intent.rows.size(), 1u);
    EXPECT_EQ(intent.rows[0].group, "others");
    EXPECT_NE(render_table(agg).find(format_half_up(agg.rows[0].overall, 2)), std::string::npos);
}

TEST(Evaluation, FullMockSweep) {
    gateway::Gateway gw;
    for (auto id : {"doc", "pat", "judge"}) gw.register_backend(config(id));
    auto pools = testkit::synthetic_eval_pools(8, 73, 20, 30);
    auto cases = build_eval_set(pools.cmb, pools.cmd, pools.cmid, 3);
    auto run = run_evaluation(cases, gw, {"doc", "pat", "judge", "", 3, 4});
    ASSERT_EQ(run.transcripts.size(), 313u);
    EXPECT_TRUE(run.opening_failures.empty());
    EXPECT_EQ(run.incomplete, 0u);
    for (const auto& t : run.transcripts) EXPECT_TRUE(transcript_problems(t, 3).empty()) << t.case_id;
    EXPECT_EQ(run.scored.size(), 313u);
    EXPECT_TRUE(run.judge_failures.empty());
    for (const auto& s : run.scored) EXPECT_TRUE(s.score.in_range());

    auto report = run_report(run);
    EXPECT_EQ(report["scored"], 313);
    EXPECT_EQ(report["aggregates"]["department"]["rows"].size(), 6u);
    EXPECT_EQ(report["aggregates"]["intent"]["rows"].size(), 4u);
    EXPECT_EQ(report["aggregates"]["source"]["rows"].size(), 3u);
}

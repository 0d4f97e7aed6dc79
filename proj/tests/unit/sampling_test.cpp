#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "forge/common/error.hpp"
#include "forge/sampling/sampler.hpp"
#include "generators.hpp"

using namespace forge;
using namespace forge::sampling;

namespace {

DepartmentTaxonomy hierarchy() {
    return DepartmentTaxonomy({"respiratory", "cardiology", "orthopedics", "pediatrics"},
                              {{"respiratory", "internal"}, {"cardiology", "internal"}, {"orthopedics", "surgery"}});
}

std::vector<std::string> dept_names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("d" + std::to_string(i));
    return out;
}

} // namespace

TEST(Extract, EqualSplit) {
    auto tax = DepartmentTaxonomy::flat({"A", "B"});
    std::vector<std::string> items{"A", "A", "B", "B"};
    auto d = extract_department_distribution(items, tax);
    EXPECT_DOUBLE_EQ(d.weight("A"), 0.5);
    EXPECT_DOUBLE_EQ(d.weight("B"), 0.5);
}

TEST(Extract, EmptyAndUnknownRejected) {
    auto tax = DepartmentTaxonomy::flat({"A"});
    std::vector<std::string> none;
    EXPECT_THROW(extract_department_distribution(none, tax), Error);
    std::vector<std::string> unknown{"A", "Z", "Y"};
    try {
        extract_department_distribution(unknown, tax);
        FAIL();
    } catch (const IngestError& e) {
        EXPECT_EQ(e.labels(), (std::vector<std::string>{"Y", "Z"}));
    }
}

TEST(Extract, HierarchicalLabelsTallyAtLeaf) {
    std::vector<std::vector<std::string>> items{{"internal", "respiratory"}, {"respiratory"}, {"surgery", "orthopedics"},
                                                {"pediatrics"}};
    auto d = extract_department_distribution(items, hierarchy());
    EXPECT_DOUBLE_EQ(d.weight("respiratory"), 0.5);
    EXPECT_DOUBLE_EQ(d.weight("orthopedics"), 0.25);
    EXPECT_EQ(d.weight("internal"), 0.0);
    std::vector<std::vector<std::string>> ancestor_only{{"internal"}};
    EXPECT_THROW(extract_department_distribution(ancestor_only, hierarchy()), IngestError);
}

TEST(Extract, RecoversKnownMultinomial) {
    const std::vector<double> truth{0.3, 0.2, 0.1, 0.1, 0.08, 0.07, 0.05, 0.04, 0.03, 0.03};
    auto names = dept_names(truth.size());
    std::mt19937_64 gen(17);
    std::discrete_distribution<std::size_t> pick(truth.begin(), truth.end());
    std::vector<std::string> items;
    for (int i = 0; i < 10000; ++i) items.push_back(names[pick(gen)]);
    auto d = extract_department_distribution(items, DepartmentTaxonomy::flat(names));
    std::map<std::string, double> expected;
    for (std::size_t i = 0; i < truth.size(); ++i) expected[names[i]] = truth[i];
    EXPECT_LE(total_variation(d.weights(), expected), 0.02);
}

TEST(Plan, SimpleApportionment) {
    DepartmentDistribution d({{"A", 0.5}, {"B", 0.5}});
    auto p = plan_stratified(d, 10, 1);
    EXPECT_EQ(p.per_department_counts.at("A"), 5u);
    EXPECT_EQ(p.per_department_counts.at("B"), 5u);
    EXPECT_EQ(p.total, 10u);

    DepartmentDistribution third({{"A", 1.0 / 3}, {"B", 1.0 / 3}, {"C", 1.0 / 3}});
    auto q = plan_stratified(third, 10, 1);
    std::multiset<std::size_t> counts;
    for (auto& [k, v] : q.per_department_counts) counts.insert(v);
    EXPECT_EQ(counts, (std::multiset<std::size_t>{3, 3, 4}));
}

TEST(Plan, LargestRemainderProperties) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 1 + gen() % 25;
        std::map<std::string, std::size_t> raw;
        for (std::size_t i = 0; i < k; ++i) raw["d" + std::to_string(i)] = 1 + gen() % 1000;
        auto dist = DepartmentDistribution::from_counts(raw);
        const std::size_t total = gen() % 20000;
        auto plan = plan_stratified(dist, total, gen());
        std::size_t sum = 0;
        for (auto& [dept, c] : plan.per_department_counts) {
            sum += c;
            // Largest remainder never moves a count a full unit from its quota.
            ASSERT_LT(std::fabs(static_cast<double>(c) - dist.weight(dept) * total), 1.0 + 1e-9);
        }
        ASSERT_EQ(sum, total);
        if (total >= 5000) {
            ASSERT_LE(total_variation(plan_frequencies(plan), dist.weights()), 0.05);
        }
    }
}

TEST(Plan, SeededAndSerializable) {
    DepartmentDistribution d({{"A", 0.25}, {"B", 0.25}, {"C", 0.25}, {"D", 0.25}});
    EXPECT_EQ(plan_stratified(d, 7, 3), plan_stratified(d, 7, 3));
    auto p = plan_stratified(d, 7, 3);
    EXPECT_EQ(plan_from_json(to_json(p)), p);
    auto dir = testkit::scratch_dir("plan");
    write_plan(p, dir / "plan.json");
    EXPECT_TRUE(std::filesystem::exists(dir / "plan.json"));
}

TEST(Plan, CheckedAgainstTaxonomy) {
    DepartmentDistribution d({{"respiratory", 0.5}, {"internal", 0.5}});
    EXPECT_THROW(check_plan_against(plan_stratified(d, 4, 0), hierarchy()), Error);
}

TEST(Draw, TenPercentOfPoolIsExact) {
    const auto n = fraction_target(3362, 0.1);
    EXPECT_EQ(n, 336u);
    auto pos = draw_uniform(3362, n, 42);
    EXPECT_EQ(pos.size(), 336u);
    EXPECT_EQ(std::set<std::size_t>(pos.begin(), pos.end()).size(), 336u);
    EXPECT_EQ(fraction_target(1853, 0.1), 185u);
    EXPECT_EQ(fraction_target(3086, 0.1), 309u);
    EXPECT_EQ(fraction_target(5, 0.5), 3u);
    EXPECT_THROW(fraction_target(5, 1.5), Error);
}

TEST(Draw, WholePoolIsIdentityAndSeedsReproduce) {
    auto all = draw_uniform(20, 20, 9);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(all[i], i);
    EXPECT_EQ(draw_uniform(1000, 100, 5), draw_uniform(1000, 100, 5));
    EXPECT_NE(draw_uniform(1000, 100, 5), draw_uniform(1000, 100, 6));
    EXPECT_THROW(draw_uniform(3, 4, 0), ShortfallError);
}

TEST(Draw, StratifiedRespectsPlanAndReportsShortfall) {
    std::vector<std::string> pool;
    for (int i = 0; i < 30; ++i) pool.push_back(i % 3 == 0 ? "A" : "B");
    SamplePlan plan{{{"A", 5}, {"B", 10}}, 15, 0};
    auto pos = draw_stratified(pool, plan, 77);
    ASSERT_EQ(pos.size(), 15u);
    EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
    std::map<std::string, std::size_t> got;
    for (auto p : pos) ++got[pool[p]];
    EXPECT_EQ(got["A"], 5u);
    EXPECT_EQ(got["B"], 10u);
    EXPECT_EQ(draw_stratified(pool, plan, 77), pos);

    SamplePlan greedy{{{"A", 12}, {"B", 1}}, 13, 0};
    try {
        draw_stratified(pool, greedy, 1);
        FAIL();
    } catch (const ShortfallError& e) {
        EXPECT_EQ(e.stratum(), "A");
        EXPECT_EQ(e.deficit(), 2u);
    }
}

TEST(Draw, TakePreservesOrder) {
    std::vector<std::string> pool{"a", "b", "c", "d"};
    std::vector<std::size_t> pos{1, 3};
    EXPECT_EQ(take(pool, pos), (std::vector<std::string>{"b", "d"}));
}

TEST(Tv, Basics) {
    EXPECT_DOUBLE_EQ(total_variation({{"a", 1.0}}, {{"b", 1.0}}), 1.0);
    EXPECT_DOUBLE_EQ(total_variation({{"a", 0.5}, {"b", 0.5}}, {{"a", 0.5}, {"b", 0.5}}), 0.0);
}

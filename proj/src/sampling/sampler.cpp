#include "forge/sampling/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/random.hpp"

namespace forge::sampling {

nlohmann::json to_json(const SamplePlan& plan) {
    return nlohmann::json{{"per_department_counts", plan.per_department_counts},
                          {"total", plan.total},
                          {"seed", plan.seed}};
}

SamplePlan plan_from_json(const nlohmann::json& j) {
    SamplePlan p;
    p.per_department_counts = j.at("per_department_counts").get<std::map<std::string, std::size_t>>();
    p.total = j.at("total").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    std::size_t sum = 0;
    for (const auto& [_, c] : p.per_department_counts) sum += c;
    if (sum != p.total) throw Error("sample plan counts do not sum to its total");
    return p;
}

void write_plan(const SamplePlan& plan, const std::filesystem::path& path) {
    write_json_file(path, to_json(plan));
}

DepartmentDistribution extract_department_distribution(std::span<const std::vector<std::string>> items,
                                                       const DepartmentTaxonomy& taxonomy) {
    std::map<std::string, std::size_t> tally;
    std::set<std::string> bad;
    for (const auto& labels : items) {
        if (auto leaf = taxonomy.resolve(labels)) {
            ++tally[*leaf];
        } else {
            std::string joined;
            for (const auto& l : labels) joined += (joined.empty() ? "" : ">") + l;
            bad.insert(joined.empty() ? "<none>" : joined);
        }
    }
    if (!bad.empty())
        throw IngestError("unresolvable department labels", std::vector<std::string>(bad.begin(), bad.end()));
    if (tally.empty()) throw Error("cannot extract a distribution from zero items");
    return DepartmentDistribution::from_counts(tally);
}

DepartmentDistribution extract_department_distribution(std::span<const std::string> items,
                                                       const DepartmentTaxonomy& taxonomy) {
    std::vector<std::vector<std::string>> wrapped;
    wrapped.reserve(items.size());
    for (const auto& s : items) wrapped.push_back({s});
    return extract_department_distribution(std::span<const std::vector<std::string>>(wrapped), taxonomy);
}

SamplePlan plan_stratified(const DepartmentDistribution& dist, std::size_t total, std::uint64_t seed) {
    struct Share {
        std::string department;
        std::size_t floor = 0;
        long double remainder = 0;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [dept, w] : dist.weights()) {
        const long double exact = static_cast<long double>(w) * static_cast<long double>(total);
        auto fl = static_cast<std::size_t>(std::floor(exact));
        shares.push_back({dept, fl, exact - static_cast<long double>(fl)});
        assigned += fl;
    }

    // Seeded shuffle first, then a stable sort by remainder: equal remainders
    // keep their shuffled relative order.
    Rng rng(derive_seed(seed, "apportionment-ties"));
    rng.shuffle(shares);
    std::stable_sort(shares.begin(), shares.end(),
                     [](const Share& a, const Share& b) { return a.remainder > b.remainder; });

    // Weights summing to 1 +/- 1e-9 can push the floors one unit past total.
    for (auto it = shares.rbegin(); assigned > total && it != shares.rend(); ++it) {
        if (it->floor > 0) {
            --it->floor;
            --assigned;
        }
    }
    for (std::size_t i = 0; assigned < total; i = (i + 1) % shares.size()) {
        ++shares[i].floor;
        ++assigned;
    }

    SamplePlan plan;
    plan.total = total;
    plan.seed = seed;
    for (const auto& s : shares) plan.per_department_counts[s.department] = s.floor;
    return plan;
}

void check_plan_against(const SamplePlan& plan, const DepartmentTaxonomy& taxonomy) {
    for (const auto& [dept, _] : plan.per_department_counts)
        if (!taxonomy.is_leaf(dept)) throw Error("planned department '" + dept + "' is not a taxonomy leaf");
}

std::vector<std::size_t> draw_uniform(std::size_t pool_size, std::size_t n, std::uint64_t seed) {
    if (n > pool_size) throw ShortfallError("<uniform>", n, pool_size);
    return choose_indices(pool_size, n, derive_seed(seed, "uniform"));
}

std::vector<std::size_t> draw_stratified(std::span<const std::string> pool_departments, const SamplePlan& plan,
                                         std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < pool_departments.size(); ++i) strata[pool_departments[i]].push_back(i);

    std::vector<std::size_t> out;
    out.reserve(plan.total);
    for (const auto& [dept, count] : plan.per_department_counts) {
        if (count == 0) continue;
        auto it = strata.find(dept);
        const std::size_t available = it == strata.end() ? 0 : it->second.size();
        if (available < count) throw ShortfallError(dept, count, available);
        for (auto local : choose_indices(available, count, derive_seed(seed, "stratum:" + dept)))
            out.push_back(it->second[local]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t fraction_target(std::size_t size, double fraction) {
    if (fraction < 0 || fraction > 1) throw Error("fraction must lie in [0, 1]");
    // Integer arithmetic on a fixed 1e-6 grid keeps 0.1 * 3086 = 308.6 exact.
    const auto micro = static_cast<unsigned long long>(std::llround(fraction * 1e6));
    const unsigned long long scaled = static_cast<unsigned long long>(size) * micro;
    return static_cast<std::size_t>((scaled + 500000ULL) / 1000000ULL);
}

std::map<std::string, double> plan_frequencies(const SamplePlan& plan) {
    std::map<std::string, double> out;
    for (const auto& [dept, c] : plan.per_department_counts)
        out[dept] = plan.total == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(plan.total);
    return out;
}

double total_variation(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
    std::set<std::string> keys;
    for (const auto& [k, _] : p) keys.insert(k);
    for (const auto& [k, _] : q) keys.insert(k);
    double sum = 0;
    for (const auto& k : keys) {
        auto pv = p.contains(k) ? p.at(k) : 0.0;
        auto qv = q.contains(k) ? q.at(k) : 0.0;
        sum += std::fabs(pv - qv);
    }
    return sum / 2.0;
}

} // namespace forge::sampling

#include <algorithm>
#include <map>

#include "forge/common/error.hpp"
#include "forge/common/random.hpp"
#include "forge/kgqa/kgqa.hpp"

namespace forge::kgqa {

SampledBundles sample_bundles(const KnowledgeGraph& graph, const DepartmentDistribution& dist, std::size_t total,
                              std::uint64_t seed, const BundleSamplingOptions& options) {
    if (options.relations_per_sample == 0 || options.max_uses_per_disease == 0)
        throw PreconditionError("relations_per_sample and max_uses_per_disease must be positive");

    std::map<std::string, std::vector<const DiseaseBundle*>> by_dept;
    for (const auto& b : graph.bundles)
        if (!b.relations.empty()) by_dept[b.department].push_back(&b);

    SampledBundles out;
    out.requested_plan = sampling::plan_stratified(dist, total, seed);
    auto counts = out.requested_plan.per_department_counts;

    std::map<std::string, std::size_t> capacity;
    std::size_t total_capacity = 0;
    for (const auto& [dept, w] : dist.weights()) {
        auto it = by_dept.find(dept);
        capacity[dept] = it == by_dept.end() ? 0 : it->second.size() * options.max_uses_per_disease;
        if (w > 0) total_capacity += capacity[dept];
    }
    if (total > total_capacity) throw ShortfallError("<knowledge graph>", total, total_capacity);

    for (auto& [dept, c] : counts) {
        if (c > capacity[dept]) {
            out.warnings.push_back({dept, c, capacity[dept]});
            c = capacity[dept];
        }
    }
    std::size_t placed = 0;
    for (const auto& [dept, c] : counts) placed += c;
    for (std::size_t round = 0; placed < total; ++round) {
        std::map<std::string, double> spare_weights;
        double mass = 0;
        for (const auto& [dept, w] : dist.weights()) {
            if (w > 0 && counts[dept] < capacity[dept]) {
                spare_weights[dept] = w;
                mass += w;
            }
        }
        for (auto& [dept, w] : spare_weights) w /= mass;
        auto extra = sampling::plan_stratified(DepartmentDistribution(std::move(spare_weights)), total - placed,
                                               derive_seed(seed, "redistribute:" + std::to_string(round)));
        for (const auto& [dept, add] : extra.per_department_counts) {
            auto take = std::min(add, capacity[dept] - counts[dept]);
            counts[dept] += take;
            placed += take;
        }
    }
    out.effective_plan = {counts, total, seed};

    for (const auto& [dept, n] : counts) {
        if (n == 0) continue;
        auto pool = by_dept.at(dept);
        Rng rng(derive_seed(seed, "kg:" + dept));
        rng.shuffle(pool);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& src = *pool[i % pool.size()];
            const auto use = i / pool.size();
            DiseaseBundle b = src;
            b.disease_id = src.disease_id + "#" + std::to_string(use);
            const auto k = std::min(options.relations_per_sample, src.relations.size());
            b.relations.clear();
            for (auto idx : choose_indices(src.relations.size(), k, derive_seed(seed, "relations:" + b.disease_id)))
                b.relations.push_back(src.relations[idx]);
            out.bundles.push_back(std::move(b));
        }
    }
    return out;
}

} // namespace forge::kgqa

#pragma once

// Department distributions and seeded selection.
//
// All functions are pure: identical inputs and seed give identical output on
// every platform (see forge/common/random.hpp for the generator contract).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/datamodel/taxonomy.hpp"
#include "forge/datamodel/types.hpp"

namespace forge::sampling {

struct SamplePlan {
    std::map<std::string, std::size_t> per_department_counts;
    std::size_t total = 0;
    std::uint64_t seed = 0;

    bool operator==(const SamplePlan&) const = default;
};

nlohmann::json to_json(const SamplePlan& plan);
SamplePlan plan_from_json(const nlohmann::json& j);
void write_plan(const SamplePlan& plan, const std::filesystem::path& path);

/// Leaf-level tally of department labels, normalized to sum to 1. Each item
/// is a label list (ancestor labels allowed) resolved to its most specific
/// leaf. Throws IngestError listing unresolvable labels, Error when empty.
DepartmentDistribution extract_department_distribution(std::span<const std::vector<std::string>> items,
                                                       const DepartmentTaxonomy& taxonomy);
DepartmentDistribution extract_department_distribution(std::span<const std::string> items,
                                                       const DepartmentTaxonomy& taxonomy);

/// Largest-remainder apportionment of `total` over the distribution's
/// weights. Departments with equal remainders are ordered by a seeded
/// shuffle before the leftover units are handed out.
SamplePlan plan_stratified(const DepartmentDistribution& dist, std::size_t total, std::uint64_t seed);

/// Throws Error if a planned department is absent from the taxonomy.
void check_plan_against(const SamplePlan& plan, const DepartmentTaxonomy& taxonomy);

/// `n` distinct positions from a pool, ascending (order-stable).
std::vector<std::size_t> draw_uniform(std::size_t pool_size, std::size_t n, std::uint64_t seed);

/// Per-department draws without replacement; `pool_departments[i]` is the
/// department of pool item i. Output positions are ascending. Throws
/// ShortfallError naming the first department whose stratum is too small.
std::vector<std::size_t> draw_stratified(std::span<const std::string> pool_departments, const SamplePlan& plan,
                                         std::uint64_t seed);

template <class T>
std::vector<T> take(std::span<const T> pool, std::span<const std::size_t> positions) {
    std::vector<T> out;
    out.reserve(positions.size());
    for (auto p : positions) out.push_back(pool[p]);
    return out;
}

template <class T>
std::vector<T> take(const std::vector<T>& pool, const std::vector<std::size_t>& positions) {
    return take(std::span<const T>(pool), std::span<const std::size_t>(positions));
}

/// round-half-up(size * fraction).
std::size_t fraction_target(std::size_t size, double fraction);

/// Frequencies of a plan's counts.
std::map<std::string, double> plan_frequencies(const SamplePlan& plan);

/// Total-variation distance between two frequency maps (missing keys are 0).
double total_variation(const std::map<std::string, double>& p, const std::map<std::string, double>& q);

} // namespace forge::sampling

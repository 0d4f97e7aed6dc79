#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace forge {

/// Department hierarchy: a flat list of leaf identifiers plus a
/// child -> parent map. Records are always tallied at their most specific
/// leaf; a label list such as ["internal_medicine", "respiratory_medicine"]
/// resolves to "respiratory_medicine".
///
/// File form:
///     {"leaves": ["respiratory_medicine", ...],
///      "parents": {"respiratory_medicine": "internal_medicine", ...}}
class DepartmentTaxonomy {
public:
    DepartmentTaxonomy() = default;
    DepartmentTaxonomy(std::vector<std::string> leaves, std::map<std::string, std::string> parents);

    static DepartmentTaxonomy from_json(const nlohmann::json& j);
    static DepartmentTaxonomy load(const std::filesystem::path& path);
    /// Every label is a leaf with no parents.
    static DepartmentTaxonomy flat(std::vector<std::string> leaves);

    nlohmann::json to_json() const;

    bool contains(const std::string& label) const;
    bool is_leaf(const std::string& label) const;
    std::size_t depth(const std::string& label) const;
    const std::vector<std::string>& leaves() const noexcept { return leaves_; }

    /// Most specific leaf named by `labels`, or nullopt when a label is
    /// unknown, the labels are not on one ancestor chain, or the most
    /// specific label is not a leaf.
    std::optional<std::string> resolve(std::span<const std::string> labels) const;
    std::optional<std::string> resolve(const std::string& label) const;

private:
    bool is_ancestor(const std::string& ancestor, const std::string& node) const;

    std::vector<std::string> leaves_;
    std::map<std::string, std::string> parents_;
    std::map<std::string, bool> known_;  // label -> is leaf
};

} // namespace forge

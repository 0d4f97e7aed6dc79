#include "forge/datamodel/taxonomy.hpp"

#include <set>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"

namespace forge {

DepartmentTaxonomy::DepartmentTaxonomy(std::vector<std::string> leaves, std::map<std::string, std::string> parents)
    : leaves_(std::move(leaves)), parents_(std::move(parents)) {
    for (const auto& leaf : leaves_) {
        if (leaf.empty()) throw ConfigError("taxonomy has an empty leaf id");
        if (!known_.emplace(leaf, true).second) throw ConfigError("duplicate taxonomy leaf '" + leaf + "'");
    }
    for (const auto& [child, parent] : parents_) {
        known_.emplace(child, false);
        if (known_.contains(parent) && known_.at(parent))
            throw ConfigError("taxonomy leaf '" + parent + "' cannot be a parent");
        known_.emplace(parent, false);
    }
    // Walk every chain; a chain longer than the node count means a cycle.
    for (const auto& [node, _] : known_) {
        std::string cur = node;
        std::size_t steps = 0;
        while (parents_.contains(cur)) {
            cur = parents_.at(cur);
            if (++steps > known_.size()) throw ConfigError("taxonomy has a cycle through '" + node + "'");
        }
    }
}

DepartmentTaxonomy DepartmentTaxonomy::from_json(const nlohmann::json& j) {
    try {
        return DepartmentTaxonomy(j.at("leaves").get<std::vector<std::string>>(),
                                  j.value("parents", std::map<std::string, std::string>{}));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed taxonomy: ") + e.what());
    }
}

DepartmentTaxonomy DepartmentTaxonomy::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

DepartmentTaxonomy DepartmentTaxonomy::flat(std::vector<std::string> leaves) {
    return DepartmentTaxonomy(std::move(leaves), {});
}

nlohmann::json DepartmentTaxonomy::to_json() const {
    return nlohmann::json{{"leaves", leaves_}, {"parents", parents_}};
}

bool DepartmentTaxonomy::contains(const std::string& label) const { return known_.contains(label); }

bool DepartmentTaxonomy::is_leaf(const std::string& label) const {
    auto it = known_.find(label);
    return it != known_.end() && it->second;
}

std::size_t DepartmentTaxonomy::depth(const std::string& label) const {
    std::size_t d = 0;
    std::string cur = label;
    while (parents_.contains(cur)) {
        cur = parents_.at(cur);
        ++d;
    }
    return d;
}

bool DepartmentTaxonomy::is_ancestor(const std::string& ancestor, const std::string& node) const {
    std::string cur = node;
    while (parents_.contains(cur)) {
        cur = parents_.at(cur);
        if (cur == ancestor) return true;
    }
    return false;
}

std::optional<std::string> DepartmentTaxonomy::resolve(std::span<const std::string> labels) const {
    if (labels.empty()) return std::nullopt;
    const std::string* deepest = nullptr;
    for (const auto& l : labels) {
        if (!contains(l)) return std::nullopt;
        if (!deepest || depth(l) > depth(*deepest)) deepest = &l;
    }
    for (const auto& l : labels)
        if (l != *deepest && !is_ancestor(l, *deepest)) return std::nullopt;
    if (!is_leaf(*deepest)) return std::nullopt;
    return *deepest;
}

std::optional<std::string> DepartmentTaxonomy::resolve(const std::string& label) const {
    return resolve(std::span<const std::string>(&label, 1));
}

} // namespace forge

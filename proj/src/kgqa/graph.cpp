#include <algorithm>
#include <map>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/kgqa/kgqa.hpp"

namespace forge::kgqa {

using nlohmann::json;

std::size_t KnowledgeGraph::relation_count() const {
    std::size_t n = 0;
    for (const auto& b : bundles) n += b.relations.size();
    return n;
}

namespace {

struct Node {
    std::string name;
    std::string type;
    std::vector<std::string> department_labels;
};

std::vector<std::string> labels_of(const json& j) {
    if (j.is_null()) return {};
    if (j.is_string()) {
        auto s = j.get<std::string>();
        return s.empty() ? std::vector<std::string>{} : std::vector<std::string>{s};
    }
    return j.get<std::vector<std::string>>();
}

} // namespace

KnowledgeGraph build_kg(const std::vector<json>& records, const DepartmentTaxonomy* taxonomy) try {
    std::map<std::string, Node> nodes;
    std::vector<const json*> edges;
    for (const auto& r : records) {
        const auto kind = r.at("kind").get<std::string>();
        if (kind == "node") {
            auto id = r.at("id").get<std::string>();
            Node n{r.at("name").get<std::string>(), r.at("type").get<std::string>(),
                   labels_of(r.value("department", json()))};
            if (!nodes.emplace(id, std::move(n)).second) throw Error("duplicate knowledge graph node '" + id + "'");
        } else if (kind == "edge") {
            edges.push_back(&r);
        } else {
            throw Error("unknown knowledge graph record kind '" + kind + "'");
        }
    }

    KnowledgeGraph g;
    g.node_count = nodes.size();
    g.edge_count = edges.size();
    std::map<std::string, DiseaseBundle> diseases;
    for (const auto& [id, n] : nodes) {
        if (n.type != "disease") continue;
        DiseaseBundle b;
        b.disease_id = id;
        b.disease = n.name;
        if (!n.department_labels.empty()) {
            if (taxonomy) {
                if (auto leaf = taxonomy->resolve(n.department_labels)) b.department = *leaf;
            } else {
                b.department = n.department_labels.back();
            }
        }
        diseases.emplace(id, std::move(b));
    }

    for (const auto* e : edges) {
        DanglingEdge d{e->at("src").get<std::string>(), e->at("relation").get<std::string>(), e->value("dst", ""), ""};
        auto src = diseases.find(d.src);
        std::string object;
        if (!nodes.contains(d.src))
            d.reason = "unknown source node";
        else if (src == diseases.end())
            d.reason = "source is not a disease";
        else if (!is_relation_kind(d.relation))
            d.reason = "unknown relation";
        else if (e->contains("value"))
            object = e->at("value").get<std::string>();
        else if (auto dst = nodes.find(d.dst); dst == nodes.end())
            d.reason = "unknown target node";
        else
            object = dst->second.name;
        if (d.reason.empty() && object.empty()) d.reason = "empty relation object";
        if (!d.reason.empty()) {
            g.dangling.push_back(std::move(d));
            continue;
        }
        src->second.relations.push_back({d.relation, object});
    }

    for (auto& [id, b] : diseases) {
        if (b.department.empty())
            g.unassigned.push_back(id);
        else
            g.bundles.push_back(std::move(b));
    }
    return g;
} catch (const json::exception& e) {
    throw Error(std::string("malformed knowledge graph record: ") + e.what());
}

KnowledgeGraph load_kg(const std::filesystem::path& path, const DepartmentTaxonomy* taxonomy) {
    std::vector<json> records;
    for_each_jsonl(path, [&](std::size_t, const json& j) {
        if (!j.is_object() || !j.contains("kind")) throw Error("record without a kind");
        records.push_back(j);
    });
    return build_kg(records, taxonomy);
}

} // namespace forge::kgqa

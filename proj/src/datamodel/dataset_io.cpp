#include "forge/datamodel/dataset_io.hpp"

#include <set>

#include "forge/common/error.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/datamodel/validate.hpp"

namespace forge {

std::string canonical_record(const DialogueSample& sample) {
    return json(sample).dump();
}

std::vector<DialogueSample> read_dataset(const std::filesystem::path& path) {
    std::vector<DialogueSample> out;
    std::set<std::string> ids;
    for_each_jsonl(path, [&](std::size_t line, const json& j) {
        DialogueSample s;
        try {
            s = j.get<DialogueSample>();
        } catch (const std::exception& e) {
            throw ParseError(line, e.what());
        }
        require_valid(s);
        if (!ids.insert(s.id).second) throw ValidationError(s.id, {"duplicate id in dataset"});
        out.push_back(std::move(s));
    });
    return out;
}

std::size_t write_dataset(std::span<const DialogueSample> samples, const std::filesystem::path& path) {
    std::set<std::string> ids;
    std::string buf;
    for (const auto& s : samples) {
        require_valid(s);
        if (!ids.insert(s.id).second) throw ValidationError(s.id, {"duplicate id in dataset"});
        buf += canonical_record(s);
        buf += '\n';
    }
    write_text_atomic(path, buf);
    return samples.size();
}

} // namespace forge

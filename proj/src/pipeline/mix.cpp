#include <algorithm>
#include <set>

#include "forge/common/jsonl.hpp"
#include "forge/common/random.hpp"
#include "forge/datamodel/dataset_io.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/pipeline/pipeline.hpp"

namespace forge::pipeline {

namespace fs = std::filesystem;

DatasetManifest reference_manifest(std::uint64_t seed) {
    using A = Ability;
    DatasetManifest m;
    m.seed = seed;
    m.components = {
        {"meddialog", Source::meddialog, 400000, StageTag::stage1,
         {A::domain_knowledge, A::behavioral_pattern, A::dialogue_ability}},
        {"cmedqa2", Source::cmedqa2, 20000, StageTag::stage1, {A::domain_knowledge}},
        {"kgqa", Source::kgqa, 50000, StageTag::stage1, {A::domain_knowledge}},
        {"preference", Source::preference, 2000, StageTag::stage2, {A::behavioral_pattern, A::human_preference}},
        {"medmcqa", Source::medmcqa, 8000, StageTag::stage1, {A::domain_knowledge}},
        {"moss", Source::general, 33000, StageTag::stage1, {A::behavioral_pattern, A::dialogue_ability}},
        {"alpaca", Source::general, 1000, StageTag::stage2, {A::human_preference}},
    };
    return m;
}

DatasetManifest scale_manifest(const DatasetManifest& m, std::size_t divisor) {
    if (divisor == 0) throw ConfigError("manifest divisor must be positive");
    DatasetManifest out = m;
    for (auto& c : out.components) {
        c.target_size = (c.target_size + divisor / 2) / divisor;
        if (c.target_size == 0) throw ConfigError("component '" + c.name + "' scales to zero samples");
    }
    return out;
}

DatasetManifest load_manifest(const fs::path& path) {
    DatasetManifest m;
    try {
        m = read_json_file(path).get<DatasetManifest>();
    } catch (const json::exception& e) {
        throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
    }
    validate_manifest(m);
    return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) { write_json_file(path, json(m)); }

void check_stage_isolation(const DatasetManifest& m) {
    for (const auto& c : m.components) {
        if (c.stage_tag == StageTag::stage2 && c.source != Source::preference && c.source != Source::general)
            throw ConfigError("stage-2 component '" + c.name + "' has source " + std::string(to_string(c.source)));
        if (c.stage_tag == StageTag::stage1 && c.source == Source::preference)
            throw ConfigError("preference component '" + c.name + "' is assigned to stage 1");
    }
}

CountMismatchError::CountMismatchError(std::string component, std::size_t target, std::size_t available)
    : Error("component '" + component + "' has " + std::to_string(available) + " samples, manifest asks for " +
            std::to_string(target) + " (delta " +
            (available >= target ? "+" + std::to_string(available - target) : "-" + std::to_string(target - available)) +
            ")"),
      component_(std::move(component)),
      target_(target),
      available_(available) {}

namespace {

json by_source(const std::vector<DialogueSample>& samples) {
    std::map<std::string, std::size_t> counts;
    for (const auto& s : samples) ++counts[std::string(to_string(s.source))];
    return counts;
}

} // namespace

MixResult assemble_mix(const DatasetManifest& manifest, const std::map<std::string, fs::path>& component_files,
                       const fs::path& out_dir) {
    try {
        validate_manifest(manifest);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    check_stage_isolation(manifest);

    std::vector<DialogueSample> stage1, stage2;
    std::set<std::string> seen_ids;
    json components = json::array();
    for (const auto& c : manifest.components) {
        auto it = component_files.find(c.name);
        if (it == component_files.end()) throw ConfigError("no file for component '" + c.name + "'");
        if (!fs::exists(it->second))
            throw ConfigError("component file " + it->second.string() + " for '" + c.name + "' does not exist");
        auto samples = read_dataset(it->second);
        if (samples.size() != c.target_size) throw CountMismatchError(c.name, c.target_size, samples.size());
        for (auto& s : samples) {
            if (s.source != c.source)
                throw ValidationError(s.id, {"source " + std::string(to_string(s.source)) + " in component '" + c.name +
                                             "' (expected " + std::string(to_string(c.source)) + ")"});
            if (!seen_ids.insert(s.id).second)
                throw ValidationError(s.id, {"id appears in more than one component"});
            s.stage_tag = c.stage_tag;
        }
        components.push_back({{"name", c.name},
                              {"source", to_string(c.source)},
                              {"stage", to_string(c.stage_tag)},
                              {"target", c.target_size},
                              {"written", samples.size()},
                              {"input_digest", file_digest(it->second)}});
        auto& dst = c.stage_tag == StageTag::stage1 ? stage1 : stage2;
        dst.insert(dst.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }

    std::set<std::string> stage1_keys;
    for (const auto& s : stage1) {
        stage1_keys.insert(s.id);
        if (s.provenance.origin_record_id) stage1_keys.insert(*s.provenance.origin_record_id);
    }
    std::vector<std::string> leaked;
    for (const auto& s : stage2) {
        if (stage1_keys.contains(s.id)) leaked.push_back(s.id);
        else if (s.provenance.origin_record_id && stage1_keys.contains(*s.provenance.origin_record_id))
            leaked.push_back(s.id);
    }
    if (!leaked.empty()) throw LeakError("stage-2 samples overlap stage 1", leaked);

    Rng(derive_seed(manifest.seed, "assemble:stage1")).shuffle(stage1);
    Rng(derive_seed(manifest.seed, "assemble:stage2")).shuffle(stage2);

    fs::create_directories(out_dir);
    MixResult r;
    r.stage1_file = out_dir / "stage1.jsonl";
    r.stage2_file = out_dir / "stage2.jsonl";
    r.accounting_file = out_dir / "accounting.json";
    r.stage1_count = write_dataset(stage1, r.stage1_file);
    r.stage2_count = write_dataset(stage2, r.stage2_file);

    r.accounting = {
        {"seed", manifest.seed},
        {"components", components},
        {"stage1", {{"count", r.stage1_count}, {"by_source", by_source(stage1)}, {"digest", file_digest(r.stage1_file)}}},
        {"stage2", {{"count", r.stage2_count}, {"by_source", by_source(stage2)}, {"digest", file_digest(r.stage2_file)}}},
        {"leak_check", {{"stage1_keys", stage1_keys.size()}, {"stage2_samples", stage2.size()}, {"overlap", 0}}},
    };
    write_json_file(r.accounting_file, r.accounting);
    return r;
}

} // namespace forge::pipeline

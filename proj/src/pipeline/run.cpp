#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <optional>
#include <set>

#include <spdlog/spdlog.h>

#include "forge/common/jsonl.hpp"
#include "forge/common/random.hpp"
#include "forge/curation/curation.hpp"
#include "forge/datamodel/dataset_io.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/datamodel/taxonomy.hpp"
#include "forge/dialogue_eval/dialogue_eval.hpp"
#include "forge/gateway/gateway.hpp"
#include "forge/kgqa/kgqa.hpp"
#include "forge/mcq/mcq.hpp"
#include "forge/mcq/medmcqa.hpp"
#include "forge/pipeline/pipeline.hpp"
#include "forge/reconstruct/reconstruct.hpp"
#include "forge/sampling/sampler.hpp"

namespace forge::pipeline {

namespace fs = std::filesystem;
using reconstruct::RawRecord;

StageError::StageError(std::string stage, const std::string& cause, std::vector<fs::path> partial_outputs)
    : Error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)), partial_(std::move(partial_outputs)) {}

namespace {

bool is_forum(Source s) { return s == Source::meddialog || s == Source::cmedqa2; }

struct Config {
    fs::path file;
    fs::path base;
    fs::path out;
    std::uint64_t seed = 0;
    std::int64_t timestamp_ms = 0;
    std::size_t workers = 4;
    std::vector<gateway::BackendConfig> backends;
    std::optional<fs::path> taxonomy;
    DatasetManifest manifest;
    json ingest, reconstruct, kgqa, medmcqa, general, curation, evaluate;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? base / path : path;
}

fs::path path_field(const Config& c, const json& section, const std::string& section_name, const std::string& key) {
    if (!section.is_object() || !section.contains(key) || !section.at(key).is_string())
        throw ConfigError("config section '" + section_name + "' needs a '" + key + "' path");
    return resolve(c.base, section.at(key).get<std::string>());
}

std::string backend_field(const Config& c, const json& section, const std::string& section_name,
                          const std::string& key = "backend") {
    if (!section.is_object() || !section.contains(key) || !section.at(key).is_string())
        throw ConfigError("config section '" + section_name + "' needs a '" + key + "' backend id");
    auto id = section.at(key).get<std::string>();
    for (const auto& b : c.backends)
        if (b.backend_id == id) return id;
    throw ConfigError("config section '" + section_name + "' names unknown backend '" + id + "'");
}

const ManifestComponent* component_with(const DatasetManifest& m, Source s) {
    for (const auto& c : m.components)
        if (c.source == s) return &c;
    return nullptr;
}

Config load_config(const fs::path& path) {
    Config c;
    c.file = path;
    c.base = path.parent_path();
    json j;
    try {
        j = read_json_file(path);
    } catch (const Error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        c.seed = j.value("seed", std::uint64_t{0});
        c.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
        c.workers = j.value("workers", std::size_t{4});
        c.out = resolve(c.base, j.value("output_dir", std::string("out")));
        if (j.contains("taxonomy")) c.taxonomy = resolve(c.base, j.at("taxonomy").get<std::string>());

        const json& backends = j.at("backends");
        if (backends.is_string()) {
            c.backends = gateway::load_backend_configs(resolve(c.base, backends.get<std::string>()));
        } else {
            for (const auto& b : backends) {
                auto bc = gateway::backend_config_from_json(b);
                if (!bc.cache_dir.empty() && bc.cache_dir.is_relative()) bc.cache_dir = c.base / bc.cache_dir;
                c.backends.push_back(std::move(bc));
            }
        }

        const json& m = j.at("manifest");
        if (m.is_string())
            c.manifest = load_manifest(resolve(c.base, m.get<std::string>()));
        else if (m.contains("reference_divisor"))
            c.manifest = scale_manifest(reference_manifest(), m.at("reference_divisor").get<std::size_t>());
        else
            c.manifest = m.get<DatasetManifest>();
        c.manifest.seed = c.seed;

        for (auto [key, dst] : {std::pair{"ingest", &c.ingest}, {"reconstruct", &c.reconstruct}, {"kgqa", &c.kgqa},
                                {"medmcqa", &c.medmcqa}, {"general", &c.general}, {"curation", &c.curation},
                                {"evaluate", &c.evaluate}})
            if (j.contains(key)) *dst = j.at(key);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }

    try {
        validate_manifest(c.manifest);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    check_stage_isolation(c.manifest);

    // Every component must have a producer configured.
    std::set<Source> seen;
    for (const auto& comp : c.manifest.components) {
        if (comp.source != Source::general && !seen.insert(comp.source).second)
            throw ConfigError("more than one component with source " + std::string(to_string(comp.source)));
        switch (comp.source) {
        case Source::meddialog:
        case Source::cmedqa2:
            if (!c.ingest.is_object() || !c.ingest.contains("raw_files"))
                throw ConfigError("config section 'ingest' needs 'raw_files'");
            backend_field(c, c.reconstruct, "reconstruct");
            break;
        case Source::kgqa:
            path_field(c, c.kgqa, "kgqa", "graph");
            backend_field(c, c.kgqa, "kgqa");
            if (!c.kgqa.contains("distribution") && !c.ingest.is_object())
                throw ConfigError("kgqa needs a 'distribution' file or an ingest section");
            break;
        case Source::medmcqa:
            path_field(c, c.medmcqa, "medmcqa", "items");
            backend_field(c, c.medmcqa, "medmcqa");
            break;
        case Source::general: path_field(c, c.general, "general", comp.name); break;
        case Source::preference:
            if (c.curation.value("mode", std::string("auto")) == "import") {
                path_field(c, c.curation, "curation", "export_file");
            } else {
                backend_field(c, c.curation, "curation");
                if (!c.ingest.is_object()) throw ConfigError("automatic curation needs an ingest section");
            }
            break;
        }
    }
    if (c.evaluate.is_object()) {
        if (c.evaluate.contains("mcq")) {
            path_field(c, c.evaluate.at("mcq"), "evaluate.mcq", "benchmark");
            backend_field(c, c.evaluate.at("mcq"), "evaluate.mcq");
        }
        if (c.evaluate.contains("dialogue")) {
            const auto& d = c.evaluate.at("dialogue");
            path_field(c, d, "evaluate.dialogue", "cases");
            for (auto k : {"doctor", "patient", "judge"}) backend_field(c, d, "evaluate.dialogue", k);
        }
    }
    return c;
}

struct StageRecord {
    json inputs = json::object();
    json outputs = json::object();
    json counts = json::object();
};

class Runner {
public:
    explicit Runner(Config config) : c_(std::move(config)) {
        for (const auto& b : c_.backends) gw_.register_backend(b);
        if (c_.taxonomy) {
            try {
                taxonomy_ = DepartmentTaxonomy::load(*c_.taxonomy);
            } catch (const std::exception& e) {
                throw ConfigError("cannot load taxonomy " + c_.taxonomy->string() + ": " + e.what());
            }
        }
        report_ = {{"config", c_.file.generic_string()},
                   {"config_digest", file_digest(c_.file)},
                   {"seed", c_.seed},
                   {"output_dir", c_.out.generic_string()},
                   {"stages", json::array()}};
    }

    RunOutcome execute() {
        fs::create_directories(c_.out);
        write_manifest(c_.manifest, c_.out / "manifest.json");
        outputs_.push_back(c_.out / "manifest.json");

        const bool forum = std::any_of(c_.manifest.components.begin(), c_.manifest.components.end(),
                                       [](const auto& comp) { return is_forum(comp.source); });
        stage("ingest", c_.ingest.is_object(), [&](auto& r, auto seed) { ingest(r, seed); });
        stage("sample", forum, [&](auto& r, auto seed) { sample(r, seed); });
        stage("reconstruct", forum, [&](auto& r, auto seed) { rewrite(r, seed); });
        stage("kgqa", has(Source::kgqa), [&](auto& r, auto seed) { kgqa(r, seed); });
        stage("medmcqa", has(Source::medmcqa), [&](auto& r, auto seed) { medmcqa(r, seed); });
        stage("general", has(Source::general), [&](auto& r, auto seed) { general(r, seed); });
        stage("curate", has(Source::preference), [&](auto& r, auto seed) { curate(r, seed); });
        stage("assemble", true, [&](auto& r, auto seed) { assemble(r, seed); });
        stage("train_config", true, [&](auto& r, auto) { train(r); });
        stage("evaluate", c_.evaluate.is_object(), [&](auto& r, auto seed) { evaluate(r, seed); });

        report_["status"] = "ok";
        report_["backends"] = backend_stats();
        auto path = c_.out / "run_report.json";
        write_json_file(path, report_);
        return {c_.out, path, report_};
    }

private:
    using StageFn = std::function<void(StageRecord&, std::uint64_t)>;

    bool has(Source s) const { return component_with(c_.manifest, s) != nullptr; }

    std::string rel(const fs::path& p) const {
        auto r = p.lexically_relative(c_.out);
        if (!r.empty() && *r.begin() != "..") return r.generic_string();
        return p.generic_string();
    }

    json file_entry(const fs::path& p) const { return {{"path", rel(p)}, {"digest", file_digest(p)}}; }

    void input(StageRecord& r, const std::string& label, const fs::path& p) {
        r.inputs[label] = fs::exists(p) ? file_entry(p) : json{{"path", rel(p)}};
    }

    void output(StageRecord& r, const std::string& label, const fs::path& p) {
        r.outputs[label] = file_entry(p);
        outputs_.push_back(p);
    }

    json backend_stats() const {
        json out = json::object();
        for (const auto& id : gw_.backend_ids()) {
            auto s = gw_.stats(id);
            out[id] = {{"requests", s.requests}, {"backend_calls", s.backend_calls}, {"cache_hits", s.cache_hits},
                       {"retries", s.retries}};
        }
        return out;
    }

    void stage(const std::string& name, bool enabled, const StageFn& fn) {
        json entry{{"name", name}};
        if (!enabled) {
            entry["status"] = "skipped";
            report_["stages"].push_back(entry);
            return;
        }
        const auto seed = derive_seed(c_.seed, "stage:" + name);
        entry["seed"] = seed;
        StageRecord rec;
        const auto start = std::chrono::steady_clock::now();
        spdlog::info("stage {}: start", name);
        try {
            fn(rec, seed);
        } catch (const std::exception& e) {
            entry["status"] = "failed";
            entry["error"] = e.what();
            entry["inputs"] = rec.inputs;
            entry["outputs"] = rec.outputs;
            report_["stages"].push_back(entry);
            report_["status"] = "failed";
            report_["failed_stage"] = name;
            report_["error"] = e.what();
            json partial = json::array();
            for (const auto& p : outputs_)
                if (fs::exists(p)) partial.push_back(rel(p));
            report_["partial_outputs"] = partial;
            report_["backends"] = backend_stats();
            try {
                write_json_file(c_.out / "run_report.json", report_);
            } catch (const std::exception& w) {
                spdlog::error("could not write run report: {}", w.what());
            }
            spdlog::error("stage {} failed: {}", name, e.what());
            std::vector<fs::path> existing;
            for (const auto& p : outputs_)
                if (fs::exists(p)) existing.push_back(p);
            throw StageError(name, e.what(), existing);
        }
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
        entry["status"] = "ok";
        entry["inputs"] = rec.inputs;
        entry["outputs"] = rec.outputs;
        entry["counts"] = rec.counts;
        entry["elapsed_ms"] = ms;
        report_["stages"].push_back(entry);
        spdlog::info("stage {}: done in {} ms", name, ms);
    }

    fs::path dir(const std::string& name) const {
        auto d = c_.out / name;
        fs::create_directories(d);
        return d;
    }

    static std::string key_of(const RawRecord& r) { return std::string(to_string(r.source)) + "/" + r.id; }

    // --- stages ---

    void ingest(StageRecord& r, std::uint64_t) {
        const auto& files = c_.ingest.at("raw_files");
        std::set<std::string> keys;
        std::size_t read = 0;
        for (std::size_t i = 0; i < files.size(); ++i) {
            auto path = resolve(c_.base, files.at(i).get<std::string>());
            input(r, "raw_" + std::to_string(i), path);
            for (auto& rec : reconstruct::read_raw_records(path)) {
                ++read;
                if (!keys.insert(key_of(rec)).second)
                    throw ValidationError(rec.id, {"raw record repeated across input files"});
                records_.push_back(std::move(rec));
            }
        }
        if (taxonomy_) reconstruct::resolve_departments(records_, *taxonomy_);

        std::vector<reconstruct::FilterRule> rules;
        if (c_.ingest.contains("filters")) {
            auto p = path_field(c_, c_.ingest, "ingest", "filters");
            input(r, "filters", p);
            rules = reconstruct::load_filter_rules(p);
        }
        std::optional<reconstruct::GazetteerEntityDetector> detector;
        if (c_.ingest.contains("entities")) {
            auto p = path_field(c_, c_.ingest, "ingest", "entities");
            input(r, "entities", p);
            detector = reconstruct::GazetteerEntityDetector::load(p);
        }
        reconstruct::validate_rules(rules, detector.has_value());
        auto outcome = reconstruct::filter_records(records_, rules, detector ? &*detector : nullptr);
        records_ = std::move(outcome.kept);

        auto d = dir("ingest");
        std::vector<json> kept, rejected;
        for (const auto& rec : records_) kept.push_back(reconstruct::to_json(rec));
        for (const auto& rej : outcome.rejected)
            rejected.push_back({{"record", reconstruct::to_json(rej.record)}, {"rule", rej.rule_id}, {"reason", rej.reason}});
        write_jsonl(d / "records.jsonl", kept);
        write_jsonl(d / "rejected.jsonl", rejected);
        output(r, "records", d / "records.jsonl");
        output(r, "rejected", d / "rejected.jsonl");

        std::map<std::string, std::size_t> tally;
        for (const auto& rec : records_)
            if (rec.department) ++tally[*rec.department];
        if (!tally.empty()) {
            distribution_ = DepartmentDistribution::from_counts(tally);
            write_json_file(d / "distribution.json", distribution_to_json(*distribution_));
            output(r, "distribution", d / "distribution.json");
        }
        r.counts = {{"read", read}, {"kept", records_.size()}, {"rejected", outcome.rejected.size()},
                    {"departments", tally.size()}};
    }

    void sample(StageRecord& r, std::uint64_t seed) {
        auto d = dir("sample");
        for (const auto& comp : c_.manifest.components) {
            if (!is_forum(comp.source)) continue;
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < records_.size(); ++i)
                if (records_[i].source == comp.source) pool.push_back(i);
            if (pool.size() < comp.target_size) throw ShortfallError(comp.name, comp.target_size, pool.size());
            Rng(derive_seed(seed, comp.name)).shuffle(pool);
            order_[comp.name] = pool;
            std::vector<json> first;
            for (std::size_t k = 0; k < comp.target_size; ++k) first.push_back(reconstruct::to_json(records_[pool[k]]));
            write_jsonl(d / (comp.name + ".jsonl"), first);
            output(r, comp.name, d / (comp.name + ".jsonl"));
            r.counts[comp.name] = {{"pool", pool.size()}, {"drawn", comp.target_size}};
        }
    }

    void rewrite(StageRecord& r, std::uint64_t) {
        const auto backend = backend_field(c_, c_.reconstruct, "reconstruct");
        reconstruct::ReconstructOptions opt{backend, c_.workers, fixed_clock(c_.timestamp_ms)};
        auto cd = dir("components"), qd = dir("reconstruct");
        for (const auto& comp : c_.manifest.components) {
            if (!is_forum(comp.source)) continue;
            const auto& order = order_.at(comp.name);
            std::vector<DialogueSample> samples;
            std::vector<reconstruct::QuarantineEntry> quarantine;
            std::size_t next = 0;
            // Quarantined records are replaced by the next ones in draw order.
            while (samples.size() < comp.target_size && next < order.size()) {
                const auto want = std::min(comp.target_size - samples.size(), order.size() - next);
                std::vector<RawRecord> batch;
                for (std::size_t k = 0; k < want; ++k) {
                    consumed_.insert(key_of(records_[order[next + k]]));
                    batch.push_back(records_[order[next + k]]);
                }
                next += want;
                auto out = reconstruct::reconstruct_all(batch, gw_, opt);
                for (auto& s : out.samples) samples.push_back(std::move(s));
                for (auto& q : out.quarantine) quarantine.push_back(std::move(q));
            }
            reconstruct::write_quarantine(quarantine, qd / (comp.name + ".quarantine.jsonl"));
            output(r, comp.name + "_quarantine", qd / (comp.name + ".quarantine.jsonl"));
            if (samples.size() < comp.target_size) throw ShortfallError(comp.name, comp.target_size, samples.size());
            finish_component(r, comp, samples, cd);
            r.counts[comp.name] = {{"records_used", next}, {"samples", samples.size()}, {"quarantined", quarantine.size()}};
        }
    }

    void finish_component(StageRecord& r, const ManifestComponent& comp, std::vector<DialogueSample>& samples,
                          const fs::path& d) {
        for (auto& s : samples) {
            s.stage_tag = comp.stage_tag;
            if (comp.stage_tag == StageTag::stage1) {
                stage1_keys_.insert(s.id);
                if (s.provenance.origin_record_id) stage1_keys_.insert(*s.provenance.origin_record_id);
            }
        }
        auto path = d / (comp.name + ".jsonl");
        write_dataset(samples, path);
        component_files_[comp.name] = path;
        output(r, comp.name, path);
    }

    void kgqa(StageRecord& r, std::uint64_t seed) {
        const auto& comp = *component_with(c_.manifest, Source::kgqa);
        auto graph_path = path_field(c_, c_.kgqa, "kgqa", "graph");
        input(r, "graph", graph_path);
        auto graph = kgqa::load_kg(graph_path, taxonomy_ ? &*taxonomy_ : nullptr);

        std::optional<DepartmentDistribution> dist = distribution_;
        if (c_.kgqa.contains("distribution")) {
            auto p = path_field(c_, c_.kgqa, "kgqa", "distribution");
            input(r, "distribution", p);
            dist = distribution_from_json(read_json_file(p));
        }
        if (!dist) throw PreconditionError("no department distribution: ingest found no departments");

        kgqa::BundleSamplingOptions so;
        so.relations_per_sample = c_.kgqa.value("relations_per_sample", so.relations_per_sample);
        so.max_uses_per_disease = c_.kgqa.value("max_uses_per_disease", so.max_uses_per_disease);
        auto sampled = kgqa::sample_bundles(graph, *dist, comp.target_size, seed, so);
        auto batch = kgqa::generate_all(sampled.bundles, gw_,
                                        {backend_field(c_, c_.kgqa, "kgqa"), c_.workers, fixed_clock(c_.timestamp_ms)});

        auto kd = dir("kgqa");
        write_json_file(kd / "report.json", kgqa::generation_report(graph, sampled, batch));
        output(r, "report", kd / "report.json");
        if (batch.samples.size() < comp.target_size)
            throw ShortfallError(comp.name, comp.target_size, batch.samples.size());
        finish_component(r, comp, batch.samples, dir("components"));
        r.counts = {{"diseases", graph.bundles.size()}, {"bundles", sampled.bundles.size()},
                    {"samples", batch.samples.size()}, {"quarantined", batch.quarantine.size()},
                    {"warnings", sampled.warnings.size()}};
    }

    void medmcqa(StageRecord& r, std::uint64_t seed) {
        const auto& comp = *component_with(c_.manifest, Source::medmcqa);
        auto path = path_field(c_, c_.medmcqa, "medmcqa", "items");
        input(r, "items", path);
        // The subset label plays no part in conversion.
        auto loaded = mcq::load_mcq(path, McqSubset::mlec_clinic);
        if (loaded.items.size() < comp.target_size)
            throw ShortfallError(comp.name, comp.target_size, loaded.items.size());
        auto items = sampling::take(loaded.items,
                                    sampling::draw_uniform(loaded.items.size(), comp.target_size, derive_seed(seed, "draw")));
        mcq::ConversionOptions opt;
        opt.backend_id = backend_field(c_, c_.medmcqa, "medmcqa");
        opt.mcq_fraction = c_.medmcqa.value("mcq_fraction", opt.mcq_fraction);
        opt.seed = derive_seed(seed, "split");
        opt.workers = c_.workers;
        opt.clock = fixed_clock(c_.timestamp_ms);
        auto batch = mcq::convert_medmcqa(items, gw_, opt);

        auto md = dir("medmcqa");
        std::vector<json> q;
        for (const auto& e : batch.quarantine)
            q.push_back({{"item_id", e.item_id}, {"step", e.step}, {"reason", e.reason}, {"raw_response", e.raw_response}});
        write_jsonl(md / "quarantine.jsonl", q);
        output(r, "quarantine", md / "quarantine.jsonl");
        if (batch.samples.size() < comp.target_size)
            throw ShortfallError(comp.name, comp.target_size, batch.samples.size());
        finish_component(r, comp, batch.samples, dir("components"));
        r.counts = {{"loaded", loaded.items.size()}, {"rejected", loaded.rejected.size()},
                    {"converted", batch.samples.size()}, {"kept_mcq", batch.kept_mcq}};
    }

    void general(StageRecord& r, std::uint64_t seed) {
        for (const auto& comp : c_.manifest.components) {
            if (comp.source != Source::general) continue;
            auto path = path_field(c_, c_.general, "general", comp.name);
            input(r, comp.name, path);
            auto pool = read_dataset(path);
            for (const auto& s : pool)
                if (s.source != Source::general)
                    throw ValidationError(s.id, {"general component '" + comp.name + "' holds source " +
                                                 std::string(to_string(s.source))});
            if (pool.size() < comp.target_size) throw ShortfallError(comp.name, comp.target_size, pool.size());
            auto chosen = sampling::take(pool, sampling::draw_uniform(pool.size(), comp.target_size,
                                                                     derive_seed(seed, comp.name)));
            finish_component(r, comp, chosen, dir("components"));
            r.counts[comp.name] = {{"pool", pool.size()}, {"drawn", chosen.size()}};
        }
    }

    void curate(StageRecord& r, std::uint64_t seed) {
        const auto& comp = *component_with(c_.manifest, Source::preference);
        std::vector<DialogueSample> exported;
        if (c_.curation.value("mode", std::string("auto")) == "import") {
            auto path = path_field(c_, c_.curation, "curation", "export_file");
            input(r, "export_file", path);
            exported = read_dataset(path);
            std::vector<std::string> leaked;
            for (const auto& s : exported)
                if (stage1_keys_.contains(s.id) ||
                    (s.provenance.origin_record_id && stage1_keys_.contains(*s.provenance.origin_record_id)))
                    leaked.push_back(s.id);
            if (!leaked.empty()) throw LeakError("imported preference samples overlap stage 1", leaked);
        } else {
            exported = auto_curate(r, comp, seed);
        }
        if (exported.size() < comp.target_size) throw ShortfallError(comp.name, comp.target_size, exported.size());
        finish_component(r, comp, exported, dir("components"));
        r.counts["exported"] = exported.size();
    }

    // Unattended review: the first selected candidates become exemplars,
    // the rest seed generation, and every generated item is accepted.
    std::vector<DialogueSample> auto_curate(StageRecord& r, const ManifestComponent& comp, std::uint64_t seed) {
        const auto exemplars = c_.curation.value("exemplars", std::size_t{3});
        const auto candidates = c_.curation.value("candidates", exemplars + 5);
        if (exemplars == 0 || candidates <= exemplars)
            throw ConfigError("curation needs at least one exemplar and more candidates than exemplars");

        std::vector<DialogueSample> pool;
        for (const auto& rec : records_) {
            if (consumed_.contains(key_of(rec))) continue;
            if (auto s = reconstruct::raw_as_sample(rec, StageTag::stage2)) pool.push_back(std::move(*s));
        }
        auto selected = curation::select_candidates(pool, stage1_keys_, candidates, derive_seed(seed, "select"));

        auto store_dir = c_.out / "curation" / "store";
        fs::remove_all(store_dir);
        curation::CurationStore store(store_dir, fixed_clock(c_.timestamp_ms));
        store.add(selected);
        for (std::size_t i = 0; i < exemplars; ++i) {
            store.submit(selected[i].id, {curation::DecisionKind::accept, std::nullopt, "auto"}, "pipeline");
            store.submit(selected[i].id, {curation::DecisionKind::promote, std::nullopt, "auto"}, "pipeline");
        }
        curation::GenerationOptions go;
        go.backend_id = backend_field(c_, c_.curation, "curation");
        go.target = comp.target_size;
        go.exemplars_per_prompt = c_.curation.value("exemplars_per_prompt", go.exemplars_per_prompt);
        go.seed = derive_seed(seed, "generate");
        go.workers = c_.workers;
        go.clock = fixed_clock(c_.timestamp_ms);
        auto batch = curation::generate_into_store(store, gw_, go);
        for (const auto& item : batch.items)
            store.submit(item.id, {curation::DecisionKind::accept, std::nullopt, "auto"}, "pipeline");
        store.flush();
        auto exported = curation::export_preference_set(store, stage1_keys_);

        auto cd = dir("curation");
        std::vector<json> q;
        for (const auto& e : batch.quarantine)
            q.push_back({{"seed_id", e.seed_id}, {"reason", e.reason}, {"raw_response", e.raw_response}});
        write_jsonl(cd / "quarantine.jsonl", q);
        output(r, "quarantine", cd / "quarantine.jsonl");
        output(r, "audit_log", store.audit_path());
        r.counts = {{"pool", pool.size()}, {"selected", selected.size()}, {"exemplars", exemplars},
                    {"generated", batch.items.size()}, {"quarantined", batch.quarantine.size()}};
        return exported;
    }

    void assemble(StageRecord& r, std::uint64_t) {
        for (const auto& [name, path] : component_files_) input(r, name, path);
        auto mix = assemble_mix(c_.manifest, component_files_, dir("mix"));
        output(r, "stage1", mix.stage1_file);
        output(r, "stage2", mix.stage2_file);
        output(r, "accounting", mix.accounting_file);
        r.counts = {{"stage1", mix.stage1_count}, {"stage2", mix.stage2_count}};
    }

    void train(StageRecord& r) {
        auto d = dir("train");
        output(r, "stage1", emit_train_config(1, d));
        output(r, "stage2", emit_train_config(2, d));
    }

    void evaluate(StageRecord& r, std::uint64_t seed) {
        auto d = dir("eval");
        if (c_.evaluate.contains("mcq")) {
            const auto& e = c_.evaluate.at("mcq");
            auto bench_path = path_field(c_, e, "evaluate.mcq", "benchmark");
            input(r, "mcq_benchmark", bench_path);
            auto bench = mcq::read_benchmark(bench_path);
            std::map<McqSubset, std::vector<McqItem>> pools;
            if (e.contains("shot_pool")) {
                auto p = path_field(c_, e, "evaluate.mcq", "shot_pool");
                input(r, "mcq_shot_pool", p);
                for (auto& item : mcq::load_mcq(p).items) pools[item.subset].push_back(std::move(item));
            }
            mcq::RunOptions opt;
            opt.backend_id = backend_field(c_, e, "evaluate.mcq");
            opt.mode = mcq::parse_prompt_mode(e.value("mode", std::string("zero")));
            opt.shots = e.value("shots", opt.shots);
            opt.seed = derive_seed(seed, "mcq");
            opt.workers = c_.workers;
            auto preds = mcq::run_benchmark(bench, pools, gw_, opt);
            std::vector<json> lines(preds.begin(), preds.end());
            write_jsonl(d / "mcq_predictions.jsonl", lines);
            output(r, "mcq_predictions", d / "mcq_predictions.jsonl");
            auto report = mcq::score(preds, bench);
            write_json_file(d / "mcq_report.json", mcq::to_json(report));
            output(r, "mcq_report", d / "mcq_report.json");
            r.counts["mcq_average"] = report.average();
        }
        if (c_.evaluate.contains("dialogue")) {
            const auto& e = c_.evaluate.at("dialogue");
            auto cases_path = path_field(c_, e, "evaluate.dialogue", "cases");
            input(r, "dialogue_cases", cases_path);
            auto cases = dialogue_eval::load_cases(cases_path);
            dialogue_eval::EvalOptions opt;
            opt.doctor_backend = backend_field(c_, e, "evaluate.dialogue", "doctor");
            opt.patient_backend = backend_field(c_, e, "evaluate.dialogue", "patient");
            opt.judge_backend = backend_field(c_, e, "evaluate.dialogue", "judge");
            opt.rounds = e.value("rounds", opt.rounds);
            opt.workers = c_.workers;
            auto run = dialogue_eval::run_evaluation(cases, gw_, opt);
            std::vector<json> lines(run.transcripts.begin(), run.transcripts.end());
            write_jsonl(d / "transcripts.jsonl", lines);
            output(r, "transcripts", d / "transcripts.jsonl");
            write_json_file(d / "dialogue_report.json", dialogue_eval::run_report(run));
            output(r, "dialogue_report", d / "dialogue_report.json");
            r.counts["dialogue_scored"] = run.scored.size();
        }
    }

    Config c_;
    gateway::Gateway gw_;
    json report_;
    std::vector<fs::path> outputs_;
    std::optional<DepartmentTaxonomy> taxonomy_;
    std::vector<RawRecord> records_;
    std::optional<DepartmentDistribution> distribution_;
    std::map<std::string, std::vector<std::size_t>> order_;
    std::set<std::string> consumed_;
    std::set<std::string> stage1_keys_;
    std::map<std::string, fs::path> component_files_;
};

} // namespace

RunOutcome run(const fs::path& config_path) {
    Runner runner(load_config(config_path));
    return runner.execute();
}

} // namespace forge::pipeline

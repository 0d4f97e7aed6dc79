// forge: command-line front end for the dataset toolkit.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "forge/common/jsonl.hpp"
#include "forge/common/random.hpp"
#include "forge/curation/server.hpp"
#include "forge/datamodel/dataset_io.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/dialogue_eval/dialogue_eval.hpp"
#include "forge/kgqa/kgqa.hpp"
#include "forge/mcq/mcq.hpp"
#include "forge/pipeline/pipeline.hpp"
#include "forge/reconstruct/reconstruct.hpp"
#include "forge/sampling/sampler.hpp"

namespace fs = std::filesystem;
using namespace forge;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void load_backends(gateway::Gateway& gw, const std::string& path) {
    if (path.empty()) throw ConfigError("--backends is required for this command");
    gateway::register_from_file(gw, path);
}

std::optional<DepartmentTaxonomy> maybe_taxonomy(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return DepartmentTaxonomy::load(path);
}

std::vector<reconstruct::RawRecord> read_records(const std::vector<std::string>& files) {
    std::vector<reconstruct::RawRecord> out;
    for (const auto& f : files)
        for (auto& r : reconstruct::read_raw_records(f)) out.push_back(std::move(r));
    return out;
}

void write_records(const std::vector<reconstruct::RawRecord>& records, const fs::path& path) {
    std::vector<json> lines;
    for (const auto& r : records) lines.push_back(reconstruct::to_json(r));
    write_jsonl(path, lines);
}

std::set<std::string> stage1_keys(const std::vector<std::string>& files) {
    std::set<std::string> keys;
    for (const auto& f : files)
        for (const auto& s : read_dataset(f)) {
            keys.insert(s.id);
            if (s.provenance.origin_record_id) keys.insert(*s.provenance.origin_record_id);
        }
    return keys;
}

std::pair<std::string, int> split_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw ConfigError("address must be host:port");
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forge: build, curate and evaluate medical dialogue datasets"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string backends_file, log_level = "info";
    std::size_t workers = 4;
    app.add_option("--backends", backends_file, "Backend config file");
    app.add_option("--workers", workers, "Parallel requests per stage");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    // run
    auto* run = app.add_subcommand("run", "Run every stage from one pipeline config");
    std::string run_config;
    run->add_option("config", run_config, "Pipeline config file")->required()->check(CLI::ExistingFile);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Read raw forum records, resolve departments, apply filters");
    std::vector<std::string> raw_files;
    std::string taxonomy_file, filters_file, entities_file, ingest_out;
    ingest->add_option("--raw", raw_files, "Raw record files")->required();
    ingest->add_option("--taxonomy", taxonomy_file, "Department taxonomy");
    ingest->add_option("--filters", filters_file, "Filter rules");
    ingest->add_option("--entities", entities_file, "Entity gazetteer for entity rules");
    ingest->add_option("--out", ingest_out, "Output directory")->required();

    // sample
    auto* sample = app.add_subcommand("sample", "Draw records uniformly or by department distribution");
    std::string sample_records, sample_out, sample_distribution;
    std::size_t sample_total = 0;
    std::uint64_t seed = 0;
    bool stratify = false;
    sample->add_option("--records", sample_records, "Ingested records")->required();
    sample->add_option("--total", sample_total, "Records to draw")->required();
    sample->add_option("--seed", seed, "Seed");
    sample->add_flag("--stratify", stratify, "Follow the department distribution");
    sample->add_option("--distribution", sample_distribution, "Distribution to follow (default: the records')");
    sample->add_option("--out", sample_out, "Output records file")->required();

    // reconstruct
    auto* recon = app.add_subcommand("reconstruct", "Rewrite doctor turns through a backend");
    std::string recon_records, recon_backend, recon_out, recon_quarantine;
    recon->add_option("--records", recon_records, "Records to rewrite")->required();
    recon->add_option("--backend", recon_backend, "Backend id")->required();
    recon->add_option("--out", recon_out, "Output dataset")->required();
    recon->add_option("--quarantine", recon_quarantine, "Quarantine file");

    // kgqa
    auto* kg = app.add_subcommand("kgqa", "Generate QA dialogues from a knowledge graph");
    std::string kg_graph, kg_distribution, kg_backend, kg_out, kg_report;
    std::size_t kg_total = 0;
    kg->add_option("--graph", kg_graph, "Graph records")->required();
    kg->add_option("--distribution", kg_distribution, "Department distribution")->required();
    kg->add_option("--taxonomy", taxonomy_file, "Department taxonomy");
    kg->add_option("--total", kg_total, "Samples to generate")->required();
    kg->add_option("--seed", seed, "Seed");
    kg->add_option("--backend", kg_backend, "Backend id")->required();
    kg->add_option("--out", kg_out, "Output dataset")->required();
    kg->add_option("--report", kg_report, "Generation report");

    // curate
    auto* curate = app.add_subcommand("curate", "Preference curation");
    curate->require_subcommand(1);
    std::string store_dir, addr = "127.0.0.1:8080", pool_file, curate_out, gen_backend;
    std::vector<std::string> stage1_files;
    std::size_t curate_target = 2000;
    auto* serve = curate->add_subcommand("serve", "Serve the review API");
    serve->add_option("--store", store_dir, "Store directory")->required();
    serve->add_option("--addr", addr, "host:port");
    serve->add_option("--pool", pool_file, "Candidate pool dataset");
    serve->add_option("--stage1", stage1_files, "Stage-1 datasets (leak guard)");
    serve->add_option("--backend", gen_backend, "Backend id for generation");
    serve->add_option("--target", curate_target, "Preference set size");
    auto* select = curate->add_subcommand("select", "Select candidates into a store");
    select->add_option("--store", store_dir, "Store directory")->required();
    select->add_option("--pool", pool_file, "Candidate pool dataset")->required();
    select->add_option("--stage1", stage1_files, "Stage-1 datasets (leak guard)");
    select->add_option("--target", curate_target, "Candidates to select")->required();
    select->add_option("--seed", seed, "Seed");
    auto* exp = curate->add_subcommand("export", "Write the accepted preference set");
    exp->add_option("--store", store_dir, "Store directory")->required();
    exp->add_option("--stage1", stage1_files, "Stage-1 datasets (leak guard)");
    exp->add_option("--out", curate_out, "Output dataset")->required();

    // assemble
    auto* assemble = app.add_subcommand("assemble", "Assemble stage files from component datasets");
    std::string manifest_file, assemble_out;
    std::vector<std::string> component_args;
    assemble->add_option("--manifest", manifest_file, "Manifest file")->required();
    assemble->add_option("--component", component_args, "name=path, one per component")->required();
    assemble->add_option("--out", assemble_out, "Output directory")->required();

    // train-config
    auto* train = app.add_subcommand("train-config", "Emit a training stage config");
    int stage = 1;
    std::string train_out = ".";
    train->add_option("--stage", stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
    train->add_option("--out", train_out, "Output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "Run a benchmark");
    eval->require_subcommand(1);
    std::string bench_file, eval_backend, mode = "zero", shot_pool, eval_out, label = "model", averaging = "unweighted";
    std::size_t shots = 3;
    auto* emcq = eval->add_subcommand("mcq", "Multiple-choice benchmark");
    emcq->add_option("--benchmark", bench_file, "Benchmark file")->required();
    emcq->add_option("--backend", eval_backend, "Backend id")->required();
    emcq->add_option("--mode", mode, "zero|few")->check(CLI::IsMember({"zero", "few"}));
    emcq->add_option("--shots", shots, "Shots per prompt in few-shot mode");
    emcq->add_option("--shot-pool", shot_pool, "Items to draw shots from");
    emcq->add_option("--seed", seed, "Seed");
    emcq->add_option("--averaging", averaging, "unweighted|weighted")->check(CLI::IsMember({"unweighted", "weighted"}));
    emcq->add_option("--label", label, "Row label");
    emcq->add_option("--out", eval_out, "Output directory");
    std::string cases_file, doctor, patient, judge, group_by = "none";
    std::size_t rounds = 3;
    auto* edlg = eval->add_subcommand("dialogue", "Simulated consultation benchmark");
    edlg->add_option("--cases", cases_file, "Case file")->required();
    edlg->add_option("--doctor", doctor, "Doctor backend")->required();
    edlg->add_option("--patient", patient, "Patient backend")->required();
    edlg->add_option("--judge", judge, "Judge backend")->required();
    edlg->add_option("--rounds", rounds, "Doctor turns per consultation");
    edlg->add_option("--group-by", group_by, "none|source|department|intent")
        ->check(CLI::IsMember({"none", "source", "department", "intent"}));
    edlg->add_option("--out", eval_out, "Output directory");

    // report
    auto* report = app.add_subcommand("report", "Summarize a run report");
    std::string report_file;
    report->add_option("run_report", report_file, "run_report.json")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*run) {
            try {
                auto outcome = pipeline::run(run_config);
                std::cout << "run complete: " << outcome.report_file.string() << "\n";
                for (const auto& s : outcome.report.at("stages"))
                    std::cout << "  " << s.at("name").get<std::string>() << ": " << s.at("status").get<std::string>()
                              << "\n";
            } catch (const pipeline::StageError& e) {
                std::cerr << e.what() << "\npartial outputs:\n";
                for (const auto& p : e.partial_outputs()) std::cerr << "  " << p.string() << "\n";
                return 1;
            }
        } else if (*ingest) {
            auto records = read_records(raw_files);
            auto taxonomy = maybe_taxonomy(taxonomy_file);
            if (taxonomy) reconstruct::resolve_departments(records, *taxonomy);
            std::vector<reconstruct::FilterRule> rules;
            if (!filters_file.empty()) rules = reconstruct::load_filter_rules(filters_file);
            std::optional<reconstruct::GazetteerEntityDetector> detector;
            if (!entities_file.empty()) detector = reconstruct::GazetteerEntityDetector::load(entities_file);
            reconstruct::validate_rules(rules, detector.has_value());
            auto outcome = reconstruct::filter_records(records, rules, detector ? &*detector : nullptr);
            fs::create_directories(ingest_out);
            write_records(outcome.kept, fs::path(ingest_out) / "records.jsonl");
            std::vector<json> rejected;
            for (const auto& r : outcome.rejected)
                rejected.push_back({{"record", reconstruct::to_json(r.record)}, {"rule", r.rule_id}, {"reason", r.reason}});
            write_jsonl(fs::path(ingest_out) / "rejected.jsonl", rejected);
            std::map<std::string, std::size_t> tally;
            for (const auto& r : outcome.kept)
                if (r.department) ++tally[*r.department];
            if (!tally.empty())
                write_json_file(fs::path(ingest_out) / "distribution.json",
                                distribution_to_json(DepartmentDistribution::from_counts(tally)));
            std::cout << "kept " << outcome.kept.size() << ", rejected " << outcome.rejected.size() << "\n";
        } else if (*sample) {
            auto records = reconstruct::read_raw_records(sample_records);
            std::vector<std::size_t> positions;
            if (stratify) {
                std::vector<std::string> depts;
                std::map<std::string, std::size_t> tally;
                for (const auto& r : records) {
                    depts.push_back(r.department.value_or(""));
                    if (r.department) ++tally[*r.department];
                }
                auto dist = sample_distribution.empty() ? DepartmentDistribution::from_counts(tally)
                                                        : distribution_from_json(read_json_file(sample_distribution));
                auto plan = sampling::plan_stratified(dist, sample_total, seed);
                positions = sampling::draw_stratified(depts, plan, derive_seed(seed, "draw"));
                sampling::write_plan(plan, fs::path(sample_out).replace_extension(".plan.json"));
            } else {
                if (records.size() < sample_total) throw ShortfallError("records", sample_total, records.size());
                positions = sampling::draw_uniform(records.size(), sample_total, seed);
            }
            write_records(sampling::take(records, positions), sample_out);
            std::cout << "drew " << positions.size() << " of " << records.size() << "\n";
        } else if (*recon) {
            gateway::Gateway gw;
            load_backends(gw, backends_file);
            auto records = reconstruct::read_raw_records(recon_records);
            auto batch = reconstruct::reconstruct_all(records, gw, {recon_backend, workers, system_clock_ms()});
            write_dataset(batch.samples, recon_out);
            if (!recon_quarantine.empty()) reconstruct::write_quarantine(batch.quarantine, recon_quarantine);
            std::cout << "rebuilt " << batch.samples.size() << ", quarantined " << batch.quarantine.size() << "\n";
        } else if (*kg) {
            gateway::Gateway gw;
            load_backends(gw, backends_file);
            auto taxonomy = maybe_taxonomy(taxonomy_file);
            auto graph = kgqa::load_kg(kg_graph, taxonomy ? &*taxonomy : nullptr);
            auto dist = distribution_from_json(read_json_file(kg_distribution));
            auto sampled = kgqa::sample_bundles(graph, dist, kg_total, seed);
            auto batch = kgqa::generate_all(sampled.bundles, gw, {kg_backend, workers, system_clock_ms()});
            write_dataset(batch.samples, kg_out);
            if (!kg_report.empty()) write_json_file(kg_report, kgqa::generation_report(graph, sampled, batch));
            for (const auto& w : sampled.warnings)
                spdlog::warn("department {}: requested {}, capacity {}", w.department, w.requested, w.available);
            std::cout << "generated " << batch.samples.size() << ", quarantined " << batch.quarantine.size() << "\n";
        } else if (*curate) {
            curation::CurationStore store(store_dir);
            if (*serve) {
                curation::ServerContext ctx;
                std::optional<gateway::Gateway> gw;
                if (!pool_file.empty()) ctx.candidate_pool = read_dataset(pool_file);
                ctx.exclusion_ids = stage1_keys(stage1_files);
                if (!backends_file.empty()) {
                    gw.emplace();
                    load_backends(*gw, backends_file);
                    ctx.gateway = &*gw;
                }
                ctx.generation.backend_id = gen_backend;
                ctx.generation.workers = workers;
                ctx.target = curate_target;
                curation::CurationServer server(store, std::move(ctx));
                auto [host, port] = split_addr(addr);
                std::signal(SIGINT, on_signal);
                std::signal(SIGTERM, on_signal);
                int bound = server.start(host, port);
                std::cout << "serving on " << host << ":" << bound << std::endl;
                while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
                server.stop();
            } else if (*select) {
                auto items = curation::select_candidates(read_dataset(pool_file), stage1_keys(stage1_files),
                                                         curate_target, seed);
                store.add(items);
                std::cout << "added " << items.size() << " candidates\n";
            } else if (*exp) {
                auto samples = curation::export_preference_set(store, stage1_keys(stage1_files));
                write_dataset(samples, curate_out);
                std::cout << "exported " << samples.size() << "\n";
            }
        } else if (*assemble) {
            std::map<std::string, fs::path> files;
            for (const auto& arg : component_args) {
                auto eq = arg.find('=');
                if (eq == std::string::npos) throw ConfigError("--component expects name=path, got " + arg);
                files[arg.substr(0, eq)] = arg.substr(eq + 1);
            }
            auto mix = pipeline::assemble_mix(pipeline::load_manifest(manifest_file), files, assemble_out);
            std::cout << "stage1 " << mix.stage1_count << ", stage2 " << mix.stage2_count << "\n";
        } else if (*train) {
            auto path = pipeline::emit_train_config(stage, train_out);
            std::cout << pipeline::render_train_config(pipeline::read_train_config(path));
        } else if (*emcq) {
            gateway::Gateway gw;
            load_backends(gw, backends_file);
            auto bench = mcq::read_benchmark(bench_file);
            std::map<McqSubset, std::vector<McqItem>> pools;
            if (!shot_pool.empty())
                for (auto& item : mcq::load_mcq(shot_pool).items) pools[item.subset].push_back(std::move(item));
            mcq::RunOptions opt{eval_backend, mcq::parse_prompt_mode(mode), shots, seed, workers};
            auto preds = mcq::run_benchmark(bench, pools, gw, opt);
            auto rep = mcq::score(preds, bench,
                                  averaging == "weighted" ? mcq::Averaging::weighted : mcq::Averaging::unweighted);
            if (!eval_out.empty()) {
                fs::create_directories(eval_out);
                write_jsonl(fs::path(eval_out) / "predictions.jsonl", std::vector<json>(preds.begin(), preds.end()));
                write_json_file(fs::path(eval_out) / "report.json", mcq::to_json(rep));
            }
            std::cout << mcq::render_table(rep, label);
        } else if (*edlg) {
            gateway::Gateway gw;
            load_backends(gw, backends_file);
            auto cases = dialogue_eval::load_cases(cases_file);
            dialogue_eval::EvalOptions opt;
            opt.doctor_backend = doctor;
            opt.patient_backend = patient;
            opt.judge_backend = judge;
            opt.rounds = rounds;
            opt.workers = workers;
            auto result = dialogue_eval::run_evaluation(cases, gw, opt);
            if (!eval_out.empty()) {
                fs::create_directories(eval_out);
                write_jsonl(fs::path(eval_out) / "transcripts.jsonl",
                            std::vector<json>(result.transcripts.begin(), result.transcripts.end()));
                write_json_file(fs::path(eval_out) / "report.json", dialogue_eval::run_report(result));
            }
            std::cout << dialogue_eval::render_table(
                dialogue_eval::aggregate(result.scored, dialogue_eval::parse_group_by(group_by)));
            if (result.incomplete || !result.judge_failures.empty() || !result.opening_failures.empty())
                std::cerr << result.incomplete << " incomplete, " << result.judge_failures.size()
                          << " unusable verdicts, " << result.opening_failures.size() << " failed openings\n";
        } else if (*report) {
            auto r = read_json_file(report_file);
            std::cout << "status: " << r.value("status", std::string("?")) << "\n";
            if (r.contains("failed_stage"))
                std::cout << "failed at " << r.at("failed_stage").get<std::string>() << ": "
                          << r.value("error", std::string()) << "\n";
            for (const auto& s : r.at("stages")) {
                std::cout << "  " << s.at("name").get<std::string>() << " [" << s.at("status").get<std::string>() << "]";
                if (s.contains("counts") && !s.at("counts").empty()) std::cout << " " << s.at("counts").dump();
                std::cout << "\n";
                if (s.contains("outputs"))
                    for (const auto& [k, v] : s.at("outputs").items())
                        std::cout << "      " << k << ": " << v.at("path").get<std::string>() << "  "
                                  << v.value("digest", std::string()).substr(0, 16) << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

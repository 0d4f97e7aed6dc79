#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <random>

#include "forge/common/jsonl.hpp"
#include "forge/datamodel/dataset_io.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/dialogue_eval/dialogue_eval.hpp"
#include "forge/mcq/mcq.hpp"
#include "forge/pipeline/pipeline.hpp"
#include "generators.hpp"

using namespace forge;
using namespace forge::pipeline;
namespace fs = std::filesystem;

namespace {

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++n;
    return n;
}

std::vector<DialogueSample> component_samples(std::mt19937_64& gen, const ManifestComponent& c, const std::string& tag) {
    std::vector<DialogueSample> out;
    for (std::size_t i = 0; i < c.target_size; ++i) {
        auto s = testkit::random_valid_sample(gen, c.name + "-" + tag + std::to_string(i));
        s.source = c.source;
        s.provenance.origin_record_id = c.name + "-origin-" + std::to_string(i);
        out.push_back(std::move(s));
    }
    return out;
}

std::map<std::string, fs::path> write_components(const DatasetManifest& m, const fs::path& dir, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::map<std::string, fs::path> files;
    for (const auto& c : m.components) {
        auto path = dir / (c.name + ".jsonl");
        write_dataset(component_samples(gen, c, ""), path);
        files[c.name] = path;
    }
    return files;
}

void edit_config(const fs::path& path, const std::function<void(json&)>& fn) {
    auto j = read_json_file(path);
    fn(j);
    write_json_file(path, j);
}

} // namespace

TEST(Manifest, ReferenceMatchesPublishedMix) {
    auto m = reference_manifest(3);
    ASSERT_EQ(m.components.size(), 7u);
    std::map<std::string, std::size_t> sizes;
    for (const auto& c : m.components) sizes[c.name] = c.target_size;
    EXPECT_EQ(sizes, (std::map<std::string, std::size_t>{{"meddialog", 400000},
                                                         {"cmedqa2", 20000},
                                                         {"kgqa", 50000},
                                                         {"preference", 2000},
                                                         {"medmcqa", 8000},
                                                         {"moss", 33000},
                                                         {"alpaca", 1000}}));
    EXPECT_NO_THROW(validate_manifest(m));
    EXPECT_NO_THROW(check_stage_isolation(m));
}

TEST(Manifest, ScaledDownByThousand) {
    auto m = scale_manifest(reference_manifest(), 1000);
    std::size_t s1 = 0, s2 = 0;
    for (const auto& c : m.components) (c.stage_tag == StageTag::stage1 ? s1 : s2) += c.target_size;
    EXPECT_EQ(s1, 511u);
    EXPECT_EQ(s2, 3u);
    EXPECT_THROW(scale_manifest(reference_manifest(), 10000), ConfigError);  // alpaca rounds to 0
    EXPECT_THROW(scale_manifest(reference_manifest(), 0), ConfigError);
}

TEST(Manifest, FileRoundTrip) {
    auto dir = testkit::scratch_dir("manifest");
    auto m = scale_manifest(reference_manifest(17), 500);
    write_manifest(m, dir / "m.json");
    EXPECT_EQ(load_manifest(dir / "m.json"), m);
}

TEST(AssembleMix, ZeroComponentsRejected) {
    auto dir = testkit::scratch_dir("mix-empty");
    EXPECT_THROW(assemble_mix(DatasetManifest{}, {}, dir), ConfigError);
}

TEST(AssembleMix, ConservesCountsOverRandomManifests) {
    std::mt19937_64 gen(99);
    for (int round = 0; round < 12; ++round) {
        auto m = reference_manifest(gen());
        for (auto& c : m.components) c.target_size = 1 + gen() % 25;
        auto dir = testkit::scratch_dir("mix-prop");
        auto files = write_components(m, dir, gen());
        auto r = assemble_mix(m, files, dir / "out");

        std::map<Source, std::size_t> want1, want2;
        std::size_t total1 = 0, total2 = 0;
        for (const auto& c : m.components) {
            (c.stage_tag == StageTag::stage1 ? want1 : want2)[c.source] += c.target_size;
            (c.stage_tag == StageTag::stage1 ? total1 : total2) += c.target_size;
        }
        EXPECT_EQ(count_lines(r.stage1_file), total1);
        EXPECT_EQ(count_lines(r.stage2_file), total2);

        std::map<Source, std::size_t> got1, got2;
        for (const auto& s : read_dataset(r.stage1_file)) {
            EXPECT_EQ(s.stage_tag, StageTag::stage1);
            EXPECT_NE(s.source, Source::preference);
            ++got1[s.source];
        }
        for (const auto& s : read_dataset(r.stage2_file)) {
            EXPECT_EQ(s.stage_tag, StageTag::stage2);
            EXPECT_TRUE(s.source == Source::preference || s.source == Source::general);
            ++got2[s.source];
        }
        EXPECT_EQ(got1, want1);
        EXPECT_EQ(got2, want2);
        EXPECT_EQ(r.accounting.at("stage1").at("count"), total1);
        EXPECT_EQ(r.accounting.at("leak_check").at("overlap"), 0);
    }
}

TEST(AssembleMix, ShuffleIsSeeded) {
    auto m = scale_manifest(reference_manifest(5), 1000);
    auto dir = testkit::scratch_dir("mix-seed");
    auto files = write_components(m, dir, 1);
    auto a = assemble_mix(m, files, dir / "a");
    auto b = assemble_mix(m, files, dir / "b");
    EXPECT_EQ(file_digest(a.stage1_file), file_digest(b.stage1_file));
    EXPECT_EQ(file_digest(a.stage2_file), file_digest(b.stage2_file));
    m.seed = 6;
    auto c = assemble_mix(m, files, dir / "c");
    EXPECT_NE(file_digest(a.stage1_file), file_digest(c.stage1_file));
    EXPECT_EQ(a.stage1_count, 511u);
    EXPECT_EQ(a.stage2_count, 3u);
}

TEST(AssembleMix, CountMismatchNamesComponentAndDelta) {
    auto m = scale_manifest(reference_manifest(5), 1000);
    auto dir = testkit::scratch_dir("mix-count");
    auto files = write_components(m, dir, 2);
    auto moss = read_dataset(files.at("moss"));
    moss.pop_back();
    moss.pop_back();
    write_dataset(moss, files.at("moss"));
    try {
        assemble_mix(m, files, dir / "out");
        FAIL() << "expected CountMismatchError";
    } catch (const CountMismatchError& e) {
        EXPECT_EQ(e.component(), "moss");
        EXPECT_EQ(e.delta(), -2);
        EXPECT_NE(std::string(e.what()).find("moss"), std::string::npos);
    }

    files.erase("kgqa");
    EXPECT_THROW(assemble_mix(m, files, dir / "out"), ConfigError);
}

TEST(AssembleMix, LeakAndIsolationGuards) {
    auto m = scale_manifest(reference_manifest(5), 1000);
    auto dir = testkit::scratch_dir("mix-leak");
    auto files = write_components(m, dir, 3);

    auto pref = read_dataset(files.at("preference"));
    auto med = read_dataset(files.at("meddialog"));
    pref[0].provenance.origin_record_id = med[4].provenance.origin_record_id;
    write_dataset(pref, files.at("preference"));
    try {
        assemble_mix(m, files, dir / "out");
        FAIL() << "expected LeakError";
    } catch (const LeakError& e) {
        EXPECT_EQ(e.ids(), std::vector<std::string>{pref[0].id});
    }

    auto swapped = m;
    for (auto& c : swapped.components)
        if (c.name == "preference") c.stage_tag = StageTag::stage1;
    EXPECT_THROW(assemble_mix(swapped, files, dir / "out"), ConfigError);
    swapped = m;
    for (auto& c : swapped.components)
        if (c.name == "kgqa") c.stage_tag = StageTag::stage2;
    EXPECT_THROW(assemble_mix(swapped, files, dir / "out"), ConfigError);

    // Same id in two components.
    files = write_components(m, dir, 3);
    auto moss = read_dataset(files.at("moss"));
    moss[0].id = med[0].id;
    write_dataset(moss, files.at("moss"));
    EXPECT_THROW(assemble_mix(m, files, dir / "out"), ValidationError);
}

TEST(TrainConfig, StageValues) {
    auto s1 = train_config(1);
    EXPECT_EQ(s1.global_batch_size, 24);
    EXPECT_EQ(s1.learning_rate, 1e-5);
    EXPECT_EQ(s1.optimizer, "adamw");
    EXPECT_EQ(s1.epochs, 1);
    EXPECT_EQ(s1.max_seq_len, 2048);
    EXPECT_EQ(s1.warmup_steps, 1800);
    EXPECT_EQ(s1.weight_decay, 0.0);
    auto s2 = train_config(2);
    EXPECT_EQ(s2.global_batch_size, 8);
    EXPECT_EQ(s2.learning_rate, 5e-6);
    EXPECT_EQ(s2.warmup_steps, 0);
    EXPECT_THROW(train_config(3), PreconditionError);
}

TEST(TrainConfig, FileRoundTrip) {
    auto dir = testkit::scratch_dir("train");
    for (int stage : {1, 2}) {
        auto path = emit_train_config(stage, dir);
        EXPECT_EQ(path.filename(), "train_stage" + std::to_string(stage) + ".conf");
        EXPECT_EQ(read_train_config(path), train_config(stage));
    }
    EXPECT_NE(read_text_file(dir / "train_stage1.conf").find("learning_rate = 1e-05"), std::string::npos);
}

TEST(TrainConfig, ParserRejectsBrokenFiles) {
    auto good = render_train_config(train_config(1));
    EXPECT_EQ(parse_train_config("# comment\n\n" + good), train_config(1));
    EXPECT_THROW(parse_train_config(good + "momentum = 0.9\n"), ParseError);
    EXPECT_THROW(parse_train_config(good + "epochs = 2\n"), ParseError);
    EXPECT_THROW(parse_train_config("stage = 1\n"), ParseError);
    auto bad = good;
    bad.replace(bad.find("= 24"), 4, "= 2x");
    EXPECT_THROW(parse_train_config(bad), ParseError);
}

class PipelineRun : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = testkit::scratch_dir("pipeline");
        config_ = testkit::write_mini_corpus(dir_, 11);
    }
    fs::path dir_;
    fs::path config_;
};

TEST_F(PipelineRun, MiniCorpusEndToEnd) {
    auto outcome = run(config_);
    const auto& report = outcome.report;
    EXPECT_EQ(report.at("status"), "ok");
    auto mix = outcome.output_dir / "mix";
    EXPECT_EQ(count_lines(mix / "stage1.jsonl"), 511u);
    EXPECT_EQ(count_lines(mix / "stage2.jsonl"), 3u);

    std::vector<std::string> names;
    for (const auto& s : report.at("stages")) {
        names.push_back(s.at("name"));
        if (s.at("name") != "evaluate") {
            EXPECT_EQ(s.at("status"), "ok") << s.dump();
            EXPECT_TRUE(s.contains("seed"));
        }
    }
    EXPECT_EQ(names, std::vector<std::string>(std::begin(kStageNames), std::end(kStageNames)));

    std::set<std::string> stage1_origins;
    for (const auto& s : read_dataset(mix / "stage1.jsonl")) {
        EXPECT_NE(s.source, Source::preference);
        stage1_origins.insert(s.id);
        if (s.provenance.origin_record_id) stage1_origins.insert(*s.provenance.origin_record_id);
    }
    for (const auto& s : read_dataset(mix / "stage2.jsonl")) {
        EXPECT_FALSE(stage1_origins.contains(s.id));
        if (s.provenance.origin_record_id) EXPECT_FALSE(stage1_origins.contains(*s.provenance.origin_record_id));
    }
    EXPECT_EQ(read_train_config(outcome.output_dir / "train" / "train_stage1.conf"), train_config(1));
    EXPECT_TRUE(fs::exists(outcome.report_file));
}

TEST_F(PipelineRun, ReplayRerunReproducesDigests) {
    auto first = run(config_);
    auto s1 = file_digest(first.output_dir / "mix" / "stage1.jsonl");
    auto s2 = file_digest(first.output_dir / "mix" / "stage2.jsonl");

    edit_config(config_, [](json& j) {
        j["backends"][0]["cache_mode"] = "replay";
        j["output_dir"] = "out2";
    });
    auto second = run(config_);
    EXPECT_EQ(file_digest(second.output_dir / "mix" / "stage1.jsonl"), s1);
    EXPECT_EQ(file_digest(second.output_dir / "mix" / "stage2.jsonl"), s2);
    EXPECT_EQ(second.report.at("backends").at("mock").at("backend_calls"), 0);

    edit_config(config_, [](json& j) {
        j["seed"] = 12;
        j["backends"][0]["cache_mode"] = "off";
        j["output_dir"] = "out3";
    });
    auto third = run(config_);
    EXPECT_NE(file_digest(third.output_dir / "mix" / "stage1.jsonl"), s1);
}

TEST_F(PipelineRun, MissingGraphAbortsAtKgqa) {
    fs::remove(dir_ / "kg.jsonl");
    try {
        run(config_);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "kgqa");
        bool has_meddialog = false;
        for (const auto& p : e.partial_outputs()) has_meddialog |= p.filename() == "meddialog.jsonl";
        EXPECT_TRUE(has_meddialog);
    }
    auto report = read_json_file(dir_ / "out" / "run_report.json");
    EXPECT_EQ(report.at("status"), "failed");
    EXPECT_EQ(report.at("failed_stage"), "kgqa");
    EXPECT_FALSE(report.at("partial_outputs").empty());
}

TEST_F(PipelineRun, ConfigProblemsStopBeforeAnyStage) {
    edit_config(config_, [](json& j) { j["kgqa"]["backend"] = "nobody"; });
    EXPECT_THROW(run(config_), ConfigError);
    EXPECT_FALSE(fs::exists(dir_ / "out"));

    edit_config(config_, [](json& j) {
        j["kgqa"]["backend"] = "mock";
        j.erase("general");
    });
    EXPECT_THROW(run(config_), ConfigError);
}

TEST_F(PipelineRun, ImportedPreferenceSetAndEvaluation) {
    // A hand-curated export replaces automatic curation.
    std::mt19937_64 gen(4);
    std::vector<DialogueSample> curated;
    for (int i = 0; i < 2; ++i) {
        auto s = testkit::random_valid_sample(gen, "curated-" + std::to_string(i));
        s.source = Source::preference;
        s.stage_tag = StageTag::stage2;
        s.provenance.origin_record_id = "hand-" + std::to_string(i);
        curated.push_back(s);
    }
    write_dataset(curated, dir_ / "curated.jsonl");

    mcq::Benchmark bench;
    for (auto subset : kAllMcqSubsets) {
        auto items = testkit::synthetic_mcq_set(static_cast<std::uint64_t>(subset) + 1, subset, 3,
                                                std::string(to_string(subset)) + "-");
        bench.counts[subset] = items.size();
        bench.items.insert(bench.items.end(), items.begin(), items.end());
    }
    mcq::write_benchmark(bench, dir_ / "bench.jsonl");
    auto pools = testkit::synthetic_eval_pools(8, 2, 0, 0);
    dialogue_eval::write_cases(pools.cmb, dir_ / "cases.jsonl");

    edit_config(config_, [](json& j) {
        j["curation"] = {{"mode", "import"}, {"export_file", "curated.jsonl"}};
        j["evaluate"] = {{"mcq", {{"benchmark", "bench.jsonl"}, {"backend", "mock"}}},
                         {"dialogue", {{"cases", "cases.jsonl"}, {"doctor", "mock"}, {"patient", "mock"}, {"judge", "mock"}}}};
    });
    auto outcome = run(config_);
    auto stage2 = read_dataset(outcome.output_dir / "mix" / "stage2.jsonl");
    std::set<std::string> ids;
    for (const auto& s : stage2) ids.insert(s.id);
    EXPECT_TRUE(ids.contains("curated-0"));
    EXPECT_TRUE(ids.contains("curated-1"));

    auto mcq_report = read_json_file(outcome.output_dir / "eval" / "mcq_report.json");
    EXPECT_TRUE(mcq_report.contains("subsets"));
    auto dlg = read_json_file(outcome.output_dir / "eval" / "dialogue_report.json");
    EXPECT_FALSE(dlg.empty());
    EXPECT_EQ(count_lines(outcome.output_dir / "eval" / "transcripts.jsonl"), 2u);
}

#pragma once

// Dataset assembly and the end-to-end run driven by one config file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/common/error.hpp"
#include "forge/datamodel/types.hpp"

namespace forge::pipeline {

using nlohmann::json;

/// The published mix: forum dialogues, forum QA, KG QA, preference,
/// MedMCQA, and the two general-purpose sets.
DatasetManifest reference_manifest(std::uint64_t seed = 0);

/// Every target divided by `divisor`, rounded half up. Throws ConfigError
/// if a component would drop to zero.
DatasetManifest scale_manifest(const DatasetManifest& m, std::size_t divisor);

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Throws ConfigError unless stage-2 components come from preference or
/// general data and no stage-1 component is preference data.
void check_stage_isolation(const DatasetManifest& m);

/// A component file whose sample count differs from its target.
class CountMismatchError : public Error {
public:
    CountMismatchError(std::string component, std::size_t target, std::size_t available);
    const std::string& component() const noexcept { return component_; }
    /// available - target
    std::int64_t delta() const noexcept { return static_cast<std::int64_t>(available_) - static_cast<std::int64_t>(target_); }

private:
    std::string component_;
    std::size_t target_;
    std::size_t available_;
};

struct MixResult {
    std::filesystem::path stage1_file;
    std::filesystem::path stage2_file;
    std::filesystem::path accounting_file;
    std::size_t stage1_count = 0;
    std::size_t stage2_count = 0;
    json accounting;
};

/// Reads one file per component (keyed by component name), checks source,
/// count and stage boundaries, tags every sample with its component's
/// stage and writes `stage1.jsonl`, `stage2.jsonl` and `accounting.json`
/// under `out_dir`, each stage shuffled with a seed derived from the
/// manifest seed. Throws CountMismatchError, LeakError, ConfigError
/// (manifest or missing file) and ValidationError (bad sample, wrong
/// source, duplicate id).
MixResult assemble_mix(const DatasetManifest& manifest,
                       const std::map<std::string, std::filesystem::path>& component_files,
                       const std::filesystem::path& out_dir);

/// Hyperparameters of stage 1 or 2; PreconditionError otherwise.
TrainStageConfig train_config(int stage);

/// `key = value` lines; numbers in shortest round-trip form.
std::string render_train_config(const TrainStageConfig& c);
/// Throws ParseError on an unknown, repeated or missing key or a bad value.
TrainStageConfig parse_train_config(std::string_view text);

/// Writes `train_stage<N>.conf` under `out_dir` and returns its path.
std::filesystem::path emit_train_config(int stage, const std::filesystem::path& out_dir);
TrainStageConfig read_train_config(const std::filesystem::path& path);

/// A stage failed. The run report has already been written.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause, std::vector<std::filesystem::path> partial_outputs);
    const std::string& stage() const noexcept { return stage_; }
    const std::vector<std::filesystem::path>& partial_outputs() const noexcept { return partial_; }

private:
    std::string stage_;
    std::vector<std::filesystem::path> partial_;
};

inline constexpr std::string_view kStageNames[] = {"ingest", "sample",   "reconstruct", "kgqa",     "medmcqa",
                                                   "general", "curate", "assemble",    "train_config", "evaluate"};

struct RunOutcome {
    std::filesystem::path output_dir;
    std::filesystem::path report_file;
    json report;
};

/// Runs every stage the config asks for. Relative paths resolve against
/// the config file's directory. Throws ConfigError before any stage runs
/// when the config is unusable, StageError when a stage fails.
RunOutcome run(const std::filesystem::path& config_path);

} // namespace forge::pipeline

#pragma once

// Study configuration, trial execution and the on-disk study store.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "autoenv/ddpg.hpp"
#include "autoenv/design.hpp"
#include "autoenv/env.hpp"
#include "autoenv/hpo.hpp"
#include "autoenv/opf.hpp"

namespace autoenv::hpo {

struct StudyConfig {
    opf::BenchmarkKind benchmark = opf::BenchmarkKind::voltage_control;
    opf::ScaleConfig scale;
    std::size_t trials = 20;
    std::size_t seeds = 2;
    std::size_t steps = 20000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t dataset_length = 4000;
    std::uint64_t dataset_seed = 0;
    data::SplitSpec split;
    std::size_t calibration_samples = 1000;
    bool multi_step = false;
    nlohmann::json design_overrides = nlohmann::json::object();
    rl::DdpgConfig ddpg;
    SamplerConfig sampler;
    opf::BaselineBudget baseline;

    [[nodiscard]] env::DesignSpace design_space() const;
    /// Throws ConfigError on any inconsistency, including the design space overrides.
    void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const StudyConfig& c);
/// Missing keys take defaults; unknown top-level keys are an error.
[[nodiscard]] StudyConfig study_config_from_json(const nlohmann::json& doc);

/// Problem, data and validation baselines shared by all trials of a study.
struct StudyContext {
    StudyConfig config;
    env::DesignSpace space;
    std::shared_ptr<const env::EnvData> data;
    std::shared_ptr<const std::vector<opf::BaselineSolution>> validation_baselines;
};

/// Builds the problem and data and solves (or loads from `cache_file`) the validation baselines.
[[nodiscard]] StudyContext make_context(const StudyConfig& config, const std::filesystem::path& cache_file,
                                        int threads = 0);

/// Seed of run `index` of trial `trial_id`.
[[nodiscard]] std::uint64_t seed_for(std::uint64_t study_seed, std::size_t trial_id, std::size_t index);

struct RunOutcome {
    rl::TrainResult training;
    env::NormStats stats;
    std::size_t resampled_states = 0;
};

/// Calibrate, then train one agent on the design.
[[nodiscard]] RunOutcome train_design(std::shared_ptr<const env::EnvData> data, const env::EnvDesign& design,
                                      const StudyConfig& config, std::size_t steps, std::uint64_t seed,
                                      const rl::TrainOptions& extra = {});

/// Trains once per seed, evaluates every checkpoint on the validation split
/// and aggregates. Training failures are recorded per seed.
[[nodiscard]] TrialRecord run_trial(const StudyContext& ctx, const env::EnvDesign& design, std::size_t trial_id,
                                    const std::vector<std::uint64_t>& seeds);

// ---------------------------------------------------------------------------

/// <dir>/config.json plus append-only <dir>/<name>.jsonl.
class StudyStore {
public:
    explicit StudyStore(std::filesystem::path dir, std::string name = "trials");

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
    [[nodiscard]] std::filesystem::path trials_file() const { return dir_ / (name_ + ".jsonl"); }
    [[nodiscard]] std::filesystem::path config_file() const { return dir_ / "config.json"; }

    [[nodiscard]] bool has_config() const;
    [[nodiscard]] StudyConfig load_config() const;
    void save_config(const StudyConfig& c) const;

    /// Records in file order; throws ConfigError on a malformed line.
    [[nodiscard]] std::vector<TrialRecord> load() const;
    /// Atomic append (write temp file, then rename).
    void append(const TrialRecord& r) const;

private:
    std::filesystem::path dir_;
    std::string name_;
};

struct Study {
    StudyConfig config;
    std::filesystem::path dir;
    std::vector<TrialRecord> trials;
};

struct StudyOptions {
    /// Stop after this many new trials (simulates an interruption).
    std::optional<std::size_t> max_new_trials;
    /// Baseline cache shared across studies; default <dir>/baselines.json.
    std::optional<std::filesystem::path> baseline_cache;
    std::function<void(const TrialRecord&)> on_trial;
};

/// Runs or resumes the study in `dir`. An existing config must match
/// (worker count excepted).
Study run_study(const StudyConfig& config, const std::filesystem::path& dir, const StudyOptions& options = {});

/// Loads a study directory without running anything.
[[nodiscard]] Study load_study(const std::filesystem::path& dir);

/// Baseline design per weight, evaluated like a trial; tag "baseline".
/// Resumable; stored in <dir>/baseline.jsonl.
std::vector<TrialRecord> run_baseline_sweep(const StudyConfig& config, const std::filesystem::path& dir,
                                            std::size_t seeds, const std::vector<double>& weights,
                                            const StudyOptions& options = {});

/// Front hypervolume after each trial, reference (1, worst mean error of the study).
[[nodiscard]] std::vector<double> hypervolume_history(const std::vector<TrialRecord>& trials);

}  // namespace autoenv::hpo

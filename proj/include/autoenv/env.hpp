#pragma once

// The parameterized OPF environment: state sampling, observations, action
// mapping, reward and episode logic around a fixed OpfProblem.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "autoenv/datasets.hpp"
#include "autoenv/design.hpp"
#include "autoenv/opf.hpp"
#include "autoenv/rl.hpp"

namespace autoenv::env {

enum class Mode { train, validation, test };
[[nodiscard]] const char* to_string(Mode m);

/// Immutable problem + data bundle shared by every environment instance.
struct EnvData {
    opf::OpfProblem problem;
    data::Dataset dataset;
    data::Splits splits;
    /// Per-column Normal fit of the training split: unit scalers then price scalers.
    std::vector<double> normal_mean;
    std::vector<double> normal_std;

    [[nodiscard]] const std::vector<std::size_t>& rows(Mode m) const;
    [[nodiscard]] opf::GridState state_at_row(std::size_t row) const;
};

[[nodiscard]] std::shared_ptr<const EnvData> make_env_data(opf::OpfProblem problem, data::Dataset dataset,
                                                           data::Splits splits);

enum class Branch { realistic, normal, uniform };

struct SampledState {
    opf::GridState state;
    Branch branch = Branch::realistic;
};

/// Mixture of training-split rows, per-column Normal draws and Uniform draws
/// over [0, 1] scalers, weighted by the design's data shares.
[[nodiscard]] SampledState sample_state(const EnvDesign& design, const EnvData& data, std::mt19937_64& rng);

/// 2 x (non-controllable units) + 3 x actuators + enabled redundant blocks.
[[nodiscard]] std::size_t observation_size(const EnvDesign& design, const opf::OpfProblem& problem);

struct Observation {
    std::vector<double> values;
    bool flow_failed = false;  // redundant blocks hold sentinel zeros
};

/// `flow` is the power flow of the state under its current setpoints.
[[nodiscard]] Observation build_observation(const EnvDesign& design, const opf::OpfProblem& problem,
                                            const opf::GridState& state, const grid::PowerFlowSolution& flow);

/// Actions are clamped to [0, 1] first.
[[nodiscard]] std::vector<double> map_action(const EnvDesign& design, const opf::OpfProblem& problem,
                                             const opf::GridState& state, std::span<const double> action);

struct NormStats {
    double mean_j = 0.0;
    double std_j = 1.0;
    double mean_p = 0.0;
    double std_p = 1.0;
    std::size_t samples = 0;
    rl::ObsNormalizer observation;
};

inline constexpr double kStdFloor = 1e-8;

[[nodiscard]] double compute_reward(const EnvDesign& design, const NormStats& stats, double j, double j_init,
                                    double penalty, bool valid);

/// Frozen statistics from n_samples (sampled state, uniform action) pairs.
/// Throws ConfigError if n_samples < 100.
[[nodiscard]] NormStats calibrate_normalization(const EnvDesign& design, const EnvData& data, std::size_t n_samples,
                                                std::mt19937_64& rng);

[[nodiscard]] nlohmann::json to_json(const NormStats& s);
[[nodiscard]] NormStats norm_stats_from_json(const nlohmann::json& doc);

struct StepInfo {
    double objective = 0.0;
    double penalty = 0.0;
    bool valid = false;
    bool converged = false;
    std::optional<double> baseline_objective;
    std::optional<bool> baseline_valid;
    std::vector<double> setpoints;
};

class OpfEnv : public rl::Environment {
public:
    OpfEnv(std::shared_ptr<const EnvData> data, EnvDesign design, NormStats stats, std::uint64_t seed = 0);

    [[nodiscard]] std::size_t observation_dim() const override;
    [[nodiscard]] std::size_t action_dim() const override;
    void seed(std::uint64_t seed) override;
    std::vector<double> reset() override { return reset(Mode::train); }
    rl::Transition step(std::span<const double> action) override;
    [[nodiscard]] rl::ObsNormalizer observation_normalizer() const override { return stats_.observation; }

    /// Train mode samples a state; evaluation modes take row `index` of the split.
    std::vector<double> reset(Mode mode, std::optional<std::size_t> index = std::nullopt);

    /// Baselines per split position, reported through info in that mode.
    void attach_baselines(Mode mode, std::shared_ptr<const std::vector<opf::BaselineSolution>> baselines);

    [[nodiscard]] const StepInfo& last_info() const { return info_; }
    [[nodiscard]] bool terminated() const { return terminated_; }
    [[nodiscard]] bool initial_flow_failed() const { return initial_failed_; }
    /// Training states resampled because their initial flow diverged.
    [[nodiscard]] std::size_t resampled() const { return resampled_; }
    [[nodiscard]] const EnvDesign& design() const { return design_; }
    [[nodiscard]] const NormStats& stats() const { return stats_; }
    [[nodiscard]] const EnvData& data() const { return *data_; }
    [[nodiscard]] const opf::GridState& state() const { return state_; }

private:
    void begin_episode(opf::GridState state);

    std::shared_ptr<const EnvData> data_;
    EnvDesign design_;
    NormStats stats_;
    std::mt19937_64 rng_;
    std::shared_ptr<const std::vector<opf::BaselineSolution>> baselines_[3];

    Mode mode_ = Mode::train;
    std::size_t index_ = 0;
    opf::GridState state_;
    double j_init_ = 0.0;
    bool initial_failed_ = false;
    std::vector<double> observation_;
    int step_index_ = 0;
    bool started_ = false;
    bool terminated_ = true;
    std::size_t resampled_ = 0;
    StepInfo info_;
};

}  // namespace autoenv::env

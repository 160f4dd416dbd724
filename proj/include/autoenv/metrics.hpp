#pragma once

// Invalid share and mean error of a policy against baseline solutions.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoenv/ddpg.hpp"
#include "autoenv/env.hpp"

namespace autoenv::metrics {

/// (invalid share, mean error); either may be missing when undefined.
struct MetricPair {
    std::optional<double> invalid_share;
    std::optional<double> mean_error;

    [[nodiscard]] bool complete() const { return invalid_share && mean_error; }
    bool operator==(const MetricPair&) const = default;
};

struct StateRecord {
    std::size_t index = 0;
    double objective = 0.0;           // J of the agent's setpoints
    double baseline_objective = 0.0;  // J*
    bool valid = false;
    bool baseline_valid = false;
};

struct EvalReport {
    std::vector<StateRecord> records;
    MetricPair metrics;
    std::size_t n_valid = 0;
    std::size_t n_valid_baseline = 0;
    std::size_t n_mutual = 0;
    std::string diagnostic;  // set when a metric is undefined
};

/// Omega = 1 - N_valid / N_valid_baseline; dJ = mean(J - J*) over mutually valid states.
[[nodiscard]] EvalReport make_report(std::vector<StateRecord> records);

/// Deterministic rollouts over a split (OpenMP over states; threads <= 0 uses the runtime default).
[[nodiscard]] EvalReport evaluate_policy(const rl::TrainedPolicy& policy, std::shared_ptr<const env::EnvData> data,
                                         const env::EnvDesign& design, const env::NormStats& stats, env::Mode mode,
                                         const std::vector<opf::BaselineSolution>& baselines, int threads = 1);

/// Mean of each metric over the reports where it is defined.
[[nodiscard]] MetricPair aggregate_checkpoints(const std::vector<EvalReport>& reports);
[[nodiscard]] MetricPair aggregate_pairs(const std::vector<MetricPair>& pairs);

struct SeedAggregate {
    MetricPair mean;
    std::optional<double> invalid_share_std;
    std::optional<double> mean_error_std;
};

/// Mean and sample standard deviation (zero for a single value) across seeds.
[[nodiscard]] SeedAggregate aggregate_seeds(const std::vector<MetricPair>& pairs);

[[nodiscard]] nlohmann::json to_json(const MetricPair& m);
[[nodiscard]] MetricPair metric_pair_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json to_json(const EvalReport& r);
[[nodiscard]] EvalReport eval_report_from_json(const nlohmann::json& doc);
/// index,objective,baseline_objective,valid,baseline_valid
[[nodiscard]] std::string records_csv(const EvalReport& r);

}  // namespace autoenv::metrics

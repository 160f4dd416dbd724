#pragma once

// Multi-objective search over environment designs: non-dominated sorting,
// the elitist evolutionary sampler, trial records and Pareto extraction.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoenv/design.hpp"
#include "autoenv/metrics.hpp"

namespace autoenv::hpo {

enum class TrialStatus { complete, failed };

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    metrics::MetricPair metrics;                    // mean over checkpoints
    std::vector<metrics::MetricPair> checkpoints;   // one per checkpoint fraction
    std::size_t resampled_states = 0;
};

struct TrialRecord {
    std::size_t id = 0;
    env::EnvDesign design;
    std::vector<SeedResult> seeds;
    metrics::MetricPair metrics;  // mean over successful seeds
    std::optional<double> invalid_share_std;
    std::optional<double> mean_error_std;
    TrialStatus status = TrialStatus::failed;
    double wall_seconds = 0.0;
    std::vector<double> checkpoint_fractions;
    std::string tag = "search";  // "search" or "baseline"

    /// Complete with both metrics defined.
    [[nodiscard]] bool rankable() const { return status == TrialStatus::complete && metrics.complete(); }
};

[[nodiscard]] nlohmann::json to_json(const TrialRecord& r);
[[nodiscard]] TrialRecord trial_from_json(const nlohmann::json& doc);
/// Recomputes status and aggregate metrics from the per-seed results.
void finalize(TrialRecord& r);

// ---------------------------------------------------------------------------
// Sorting

/// p dominates q iff p <= q componentwise and p < q somewhere (minimization).
[[nodiscard]] bool dominates(const std::array<double, 2>& p, const std::array<double, 2>& q);

/// Front ranks; 0 is non-dominated. Entries without both metrics get a rank
/// one past the last complete front.
[[nodiscard]] std::vector<int> nondominated_sort(const std::vector<metrics::MetricPair>& points);
[[nodiscard]] std::vector<int> nondominated_sort(const std::vector<std::array<double, 2>>& points);

/// Crowding distance of each member of one front (boundary members infinite).
[[nodiscard]] std::vector<double> crowding_distance(const std::vector<std::array<double, 2>>& front);

/// Area dominated by the points and bounded by ref (both objectives minimized).
[[nodiscard]] double hypervolume_2d(std::vector<std::array<double, 2>> points, const std::array<double, 2>& ref);

[[nodiscard]] std::vector<const TrialRecord*> pareto_front(const std::vector<TrialRecord>& trials);

// ---------------------------------------------------------------------------
// Sampler

struct SamplerConfig {
    std::size_t generation_size = 10;
    double crossover_prob = 0.9;
    double eta_crossover = 15.0;
    double eta_mutation = 20.0;
    bool mutation = true;
    std::optional<double> mutation_prob;  // default 1 / number of free variables

    void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const SamplerConfig& c);
[[nodiscard]] SamplerConfig sampler_config_from_json(const nlohmann::json& doc);

/// Elite `size` of the given trials: rank then crowding distance, ties by id.
[[nodiscard]] std::vector<const TrialRecord*> select_elite(const std::vector<const TrialRecord*>& trials,
                                                           std::size_t size);

/// Design for `trial_id`. Uniform for the first generation; later offspring of
/// the elite of all trials from earlier generations. Deterministic in
/// (study_seed, trial_id, history).
[[nodiscard]] env::EnvDesign propose_design(const env::DesignSpace& space, const std::vector<TrialRecord>& history,
                                            std::size_t trial_id, std::uint64_t study_seed,
                                            const SamplerConfig& config = {});

/// Child of two parents by SBX / uniform crossover and mutation. Exposed for tests.
[[nodiscard]] env::EnvDesign make_offspring(const env::DesignSpace& space, const env::EnvDesign& a,
                                            const env::EnvDesign& b, const SamplerConfig& config,
                                            std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Criteria and extraction

enum class Criterion { pareto, validity, optimization, utopia };
[[nodiscard]] const char* to_string(Criterion c);
[[nodiscard]] Criterion criterion_from_string(const std::string& s);

/// Rankable trials ordered best first under the criterion, ties by id.
[[nodiscard]] std::vector<const TrialRecord*> order_trials(const std::vector<TrialRecord>& trials, Criterion c);

/// Utopia score per trial (min-max normalized invalid share + mean error),
/// aligned with `trials`; missing for unrankable trials.
[[nodiscard]] std::vector<std::optional<double>> utopia_scores(const std::vector<TrialRecord>& trials);

/// Mean for floats (shares re-normalized), mode for discretes with ties broken
/// toward the baseline design's value.
[[nodiscard]] env::EnvDesign combine_designs(const env::DesignSpace& space, const std::vector<env::EnvDesign>& designs);

/// Combination of the top-k trials under the criterion. Throws ConfigError if none is rankable.
[[nodiscard]] env::EnvDesign extract_design(const env::DesignSpace& space, const std::vector<TrialRecord>& trials,
                                            Criterion c, std::size_t k = 5);

}  // namespace autoenv::hpo

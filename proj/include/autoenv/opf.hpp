#pragma once

// The five benchmark OPF problems on synthetic feeders, their objectives and
// the multi-start pattern-search baseline solver.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoenv/datasets.hpp"
#include "autoenv/grid.hpp"

namespace autoenv::opf {

enum class BenchmarkKind { voltage_control, load_shedding, economic_dispatch, q_market, max_renewables };

inline constexpr BenchmarkKind kAllBenchmarks[] = {BenchmarkKind::voltage_control, BenchmarkKind::load_shedding,
                                                   BenchmarkKind::economic_dispatch, BenchmarkKind::q_market,
                                                   BenchmarkKind::max_renewables};

[[nodiscard]] const char* to_string(BenchmarkKind kind);
/// Accepts "voltage-control", "voltage_control", ... Throws ConfigError otherwise.
[[nodiscard]] BenchmarkKind benchmark_from_string(const std::string& s);

enum class Axis { p, q };

/// One controlled axis of one unit. For a controllable load the P setpoint is
/// the shed power, in [0, current demand].
struct Actuator {
    int unit = 0;
    Axis axis = Axis::p;
    /// Per-state price drawn from [price_min, price_max]; unpriced if equal and zero.
    double price_min = 0.0;
    double price_max = 0.0;

    [[nodiscard]] bool priced() const { return price_max > 0.0; }
};

struct ScaleConfig {
    int buses = 8;      // 6..14
    int actuators = 4;  // 2..6
    bool meshed = false;
};

struct OpfProblem {
    BenchmarkKind kind = BenchmarkKind::voltage_control;
    ScaleConfig scale;
    std::shared_ptr<const grid::PowerFlowSolver> solver;
    grid::ConstraintLimits limits;
    grid::PenaltyScaling scaling;
    std::vector<Actuator> actuators;
    /// Dataset column archetype per unit (storages use theirs as state of charge).
    std::vector<data::Archetype> unit_archetypes;
    double loss_price = 0.0;       // currency / MWh, q-market only
    double load_tan_phi = 0.3;     // reactive demand per active demand
    double rating_factor = 1.1;    // inverter apparent-power rating per nominal P

    [[nodiscard]] const grid::Grid& grid() const { return solver->grid(); }
    [[nodiscard]] std::size_t action_dim() const { return actuators.size(); }
    [[nodiscard]] std::size_t price_channels() const;
    [[nodiscard]] bool is_controllable_unit(std::size_t unit) const;
    [[nodiscard]] data::TimeseriesConfig timeseries_config(std::size_t length = 4000) const;
    /// Stable digest of everything that affects power flows and objectives.
    [[nodiscard]] std::uint64_t hash() const;
};

/// Synthetic feeder with one HV/MV transformer at the slack. Deterministic in
/// (kind, scale). Throws ConfigError on sizes outside 6..14 buses / 2..6 actuators.
[[nodiscard]] OpfProblem make_benchmark(BenchmarkKind kind, const ScaleConfig& scale = {});

[[nodiscard]] nlohmann::json benchmark_config_to_json(BenchmarkKind kind, const ScaleConfig& scale);
[[nodiscard]] OpfProblem benchmark_from_json(const nlohmann::json& doc);

/// Uncontrollable grid state in unit convention plus dynamic setpoint limits.
struct GridState {
    std::vector<double> p;
    std::vector<double> q;
    std::vector<double> p_min;
    std::vector<double> p_max;
    std::vector<double> q_min;
    std::vector<double> q_max;
    std::vector<double> prices;  // per actuator, 0 when unpriced

    [[nodiscard]] std::uint64_t hash() const;
};

/// Builds a state from unit scalers (one per unit, [0, 1]) and price scalers
/// (one per priced actuator, [0, 1]).
[[nodiscard]] GridState make_state(const OpfProblem& problem, std::span<const double> unit_scalers,
                                   std::span<const double> price_scalers);

struct ActionBox {
    std::vector<double> lo;
    std::vector<double> hi;
};
[[nodiscard]] ActionBox dynamic_box(const OpfProblem& problem, const GridState& state);
[[nodiscard]] ActionBox nominal_box(const OpfProblem& problem);

/// Setpoints of the unoptimized state: full renewable feed-in, zero reactive
/// power, idle storage, no shedding (clipped into the dynamic box).
[[nodiscard]] std::vector<double> initial_setpoints(const OpfProblem& problem, const GridState& state);

[[nodiscard]] grid::BusInjections bus_injections(const OpfProblem& problem, const GridState& state,
                                                 std::span<const double> setpoints);

[[nodiscard]] double objective(const OpfProblem& problem, const GridState& state,
                               const grid::PowerFlowSolution& solution, std::span<const double> setpoints);

struct Simulation {
    grid::PowerFlowSolution flow;
    grid::ConstraintReport report;
    double penalty = 0.0;
    double objective = 0.0;  // 0 when the flow did not converge
};

[[nodiscard]] Simulation simulate(const OpfProblem& problem, const GridState& state, std::span<const double> setpoints);
[[nodiscard]] bool is_valid(const OpfProblem& problem, const GridState& state, std::span<const double> setpoints);

// ---------------------------------------------------------------------------
// Baseline solver

struct BaselineBudget {
    int starts = 16;
    std::uint64_t seed = 0;
    double initial_step = 0.25;   // fraction of box width
    double min_step = 1e-5;
    int penalty_stages = 3;       // rho = spread * 100^k
};

enum class BaselineStatus { optimal, infeasible };

struct BaselineSolution {
    std::vector<double> setpoints;
    double objective = 0.0;
    bool valid = false;
    BaselineStatus status = BaselineStatus::infeasible;
    long evaluations = 0;
};

/// Multi-start penalized pattern search in the dynamic action box. Each start
/// is polished by coordinate polls (with pairwise diagonal polls before every
/// step contraction) on J + rho * P for increasing rho.
[[nodiscard]] BaselineSolution baseline_solve(const OpfProblem& problem, const GridState& state,
                                              const BaselineBudget& budget = {});

[[nodiscard]] nlohmann::json to_json(const BaselineSolution& s);
[[nodiscard]] BaselineSolution baseline_from_json(const nlohmann::json& doc);

/// Disk-backed memo of baseline solutions keyed by (problem hash, state hash, seed).
class BaselineCache {
public:
    BaselineCache() = default;
    explicit BaselineCache(std::filesystem::path file);

    [[nodiscard]] std::optional<BaselineSolution> find(std::uint64_t problem, std::uint64_t state,
                                                       std::uint64_t seed) const;
    void insert(std::uint64_t problem, std::uint64_t state, std::uint64_t seed, const BaselineSolution& s);
    void flush() const;
    [[nodiscard]] std::size_t size() const;

private:
    static std::string key(std::uint64_t problem, std::uint64_t state, std::uint64_t seed);
    std::filesystem::path file_;
    std::map<std::string, BaselineSolution> entries_;
    mutable std::mutex mutex_;
};

}  // namespace autoenv::opf

#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace autoenv::env {

/// One concrete environment design. Field names are the interchange names.
struct EnvDesign {
    // reward
    double valid_reward = 0.0;
    double invalid_penalty = 0.0;
    double invalid_objective_share = 1.0;
    double penalty_weight = 0.5;
    bool diff_objective = false;
    // training data mixture, sums to one
    double normal_data = 0.0;
    double uniform_data = 0.0;
    double realistic_data = 1.0;
    // redundant observations
    bool add_voltage_magnitude = false;
    bool add_voltage_angle = false;
    bool add_line_loading = false;
    bool add_trafo_loading = false;
    bool add_slack_power = false;
    // episode and actions
    int steps_per_episode = 1;
    bool autoscaling = true;

    bool operator==(const EnvDesign&) const = default;
};

enum class VarType { real, boolean, integer };

struct VariableSpec {
    std::string name;
    VarType type = VarType::real;
    double low = 0.0;
    double high = 1.0;
    std::vector<int> choices;  // integer variables only
};

class DesignSpace {
public:
    /// The 15-variable search space; steps_per_episode is {1} unless multi_step.
    static DesignSpace standard(bool multi_step = false);

    [[nodiscard]] const std::vector<VariableSpec>& variables() const { return vars_; }
    [[nodiscard]] const VariableSpec& at(std::string_view name) const;
    [[nodiscard]] std::size_t size() const { return vars_.size(); }

    /// Overrides per variable: {"low": a, "high": b}, {"choices": [...]} or {"fixed": v}.
    /// Narrowing only; widening beyond the standard ranges is a ConfigError.
    void apply_overrides(const nlohmann::json& overrides);

    /// Throws ConfigError if any value is outside its range or shares do not sum to one.
    void validate(const EnvDesign& design) const;
    [[nodiscard]] bool contains(const EnvDesign& design) const;

    /// Uniform over every range; data shares uniform on the simplex.
    [[nodiscard]] EnvDesign sample(std::mt19937_64& rng) const;

    /// Clamps every variable into range and re-projects the data shares.
    void repair(EnvDesign& design) const;

    [[nodiscard]] nlohmann::json to_json() const;

private:
    std::vector<VariableSpec> vars_;
};

inline constexpr const char* kShareNames[] = {"normal_data", "uniform_data", "realistic_data"};

/// Generic access by interchange name; booleans map to 0/1.
[[nodiscard]] double get_value(const EnvDesign& d, std::string_view name);
void set_value(EnvDesign& d, std::string_view name, double value);

/// Euclidean projection of the three data shares onto the probability simplex.
void project_shares(EnvDesign& d);
/// Projection onto {sum = 1, lo <= v <= hi}. Requires sum(lo) <= 1 <= sum(hi).
void project_onto_capped_simplex(std::span<double> v, std::span<const double> lo, std::span<const double> hi);

/// Fixed manual design: zero offsets, psi = 1, only realistic data, no extra
/// observations, one step, autoscaling.
[[nodiscard]] EnvDesign baseline_design(double penalty_weight);
inline constexpr double kBaselinePenaltyWeights[] = {0.1, 0.3, 0.5, 0.7, 0.9};

[[nodiscard]] nlohmann::json to_json(const EnvDesign& d);
/// Flat object with exactly the interchange names; unknown keys are an error.
[[nodiscard]] EnvDesign design_from_json(const nlohmann::json& doc);

}  // namespace autoenv::env

#pragma once

// Minimal interface between learners and environments.

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace autoenv::rl {

/// Fixed affine observation normalizer: (x - mean) / std.
struct ObsNormalizer {
    std::vector<double> mean;
    std::vector<double> std;

    [[nodiscard]] bool empty() const { return mean.empty(); }
    void apply(std::span<const double> in, std::span<double> out) const;
    [[nodiscard]] std::vector<double> apply(std::span<const double> in) const;

    /// Column statistics of row-major samples; std floored at `floor`.
    static ObsNormalizer fit(std::span<const double> rows, std::size_t dim, double floor = 1e-8);
};

[[nodiscard]] nlohmann::json to_json(const ObsNormalizer& n);
[[nodiscard]] ObsNormalizer normalizer_from_json(const nlohmann::json& doc);

struct Transition {
    std::vector<double> obs;
    double reward = 0.0;
    bool terminated = true;
};

/// Training-mode episodic environment with actions in [0, 1]^d.
class Environment {
public:
    virtual ~Environment() = default;
    [[nodiscard]] virtual std::size_t observation_dim() const = 0;
    [[nodiscard]] virtual std::size_t action_dim() const = 0;
    virtual void seed(std::uint64_t seed) = 0;
    virtual std::vector<double> reset() = 0;
    virtual Transition step(std::span<const double> action) = 0;
    /// Normalizer the agent should apply; empty means identity.
    [[nodiscard]] virtual ObsNormalizer observation_normalizer() const { return {}; }
};

}  // namespace autoenv::rl

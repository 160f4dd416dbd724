#pragma once

// DDPG with Gaussian exploration, uniform replay and soft target updates.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "autoenv/mlp.hpp"
#include "autoenv/rl.hpp"

namespace autoenv::rl {

struct DdpgConfig {
    double actor_lr = 1e-4;
    double critic_lr = 5e-4;
    std::size_t batch_size = 256;
    double gamma = 0.9;
    std::size_t memory_size = 1'000'000;
    double noise_std = 0.1;
    std::size_t start_train = 2000;
    double tau = 0.001;
    std::vector<std::size_t> hidden = {64, 64};
    bool double_precision = false;
    std::vector<double> checkpoint_fractions = {0.625, 0.75, 0.875, 1.0};

    /// Hidden sizes (256, 256, 256).
    static DdpgConfig paper_size();
    /// Throws ConfigError on non-positive sizes/rates or tau/gamma out of range.
    void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const DdpgConfig& c);
[[nodiscard]] DdpgConfig ddpg_config_from_json(const nlohmann::json& doc);

class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim);

    void add(std::span<const double> obs, std::span<const double> action, double reward,
             std::span<const double> next_obs, bool terminated);
    /// Uniform with replacement.
    [[nodiscard]] std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;

    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] std::span<const double> obs(std::size_t i) const { return {obs_.data() + i * od_, od_}; }
    [[nodiscard]] std::span<const double> action(std::size_t i) const { return {act_.data() + i * ad_, ad_}; }
    [[nodiscard]] std::span<const double> next_obs(std::size_t i) const { return {next_.data() + i * od_, od_}; }
    [[nodiscard]] double reward(std::size_t i) const { return rew_[i]; }
    [[nodiscard]] bool terminated(std::size_t i) const { return done_[i] != 0; }

private:
    std::size_t capacity_;
    std::size_t od_;
    std::size_t ad_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;
    std::vector<double> obs_;
    std::vector<double> act_;
    std::vector<double> next_;
    std::vector<double> rew_;
    std::vector<unsigned char> done_;
};

/// Deterministic actor plus its observation normalizer.
struct TrainedPolicy {
    Mlp<double> actor;  // tanh output; action = (y + 1) / 2
    ObsNormalizer normalizer;
    bool double_precision = false;
    std::size_t steps = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t action_dim() const { return actor.output_size(); }
};

/// noise_std = 0 gives the deterministic policy action.
[[nodiscard]] std::vector<double> act(const TrainedPolicy& policy, std::span<const double> observation,
                                      double noise_std = 0.0, std::mt19937_64* rng = nullptr);

[[nodiscard]] nlohmann::json to_json(const TrainedPolicy& p);
[[nodiscard]] TrainedPolicy policy_from_json(const nlohmann::json& doc);
void save_policy(const TrainedPolicy& p, const std::filesystem::path& file);
[[nodiscard]] TrainedPolicy load_policy(const std::filesystem::path& file);

struct UpdateStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;  // -mean Q(s, pi(s))
};

/// Online and target actor/critic with their optimizers.
template <class T>
class DdpgAgent {
public:
    DdpgAgent(std::size_t obs_dim, std::size_t act_dim, const DdpgConfig& config, std::uint64_t seed);

    /// One gradient step on the given transitions. Throws TrainingFailure on a non-finite loss.
    UpdateStats update(const ReplayBuffer& buffer, std::span<const std::size_t> batch);

    /// Critic targets r + gamma (1 - done) Q'(s', pi'(s')) for a batch.
    [[nodiscard]] std::vector<double> critic_targets(const ReplayBuffer& buffer,
                                                     std::span<const std::size_t> batch) const;

    [[nodiscard]] TrainedPolicy snapshot(const ObsNormalizer& normalizer, std::size_t steps) const;

    Mlp<T> actor;
    Mlp<T> critic;
    Mlp<T> actor_target;
    Mlp<T> critic_target;

private:
    DdpgConfig config_;
    std::uint64_t seed_;
    std::size_t obs_dim_;
    std::size_t act_dim_;
    Adam<T> actor_opt_;
    Adam<T> critic_opt_;
};

struct TrainOptions {
    std::size_t steps = 20000;
    std::uint64_t seed = 0;
    /// Called every `eval_every` steps (0 disables) with the current policy.
    std::size_t eval_every = 0;
    std::function<void(std::size_t step, const TrainedPolicy&)> on_eval;
};

struct TrainResult {
    TrainedPolicy final_policy;
    std::vector<TrainedPolicy> checkpoints;  // one per checkpoint fraction
    std::vector<std::size_t> checkpoint_steps;
    std::size_t updates = 0;
    double mean_reward = 0.0;
    UpdateStats last_update;
};

/// Full interaction loop: uniform random actions during warm-up (steps below
/// start_train), then noisy policy actions with one update per step.
[[nodiscard]] TrainResult train(Environment& env, const DdpgConfig& config, const TrainOptions& options);

/// Step index (1-based count of completed steps) at which each fraction is taken.
[[nodiscard]] std::vector<std::size_t> checkpoint_steps(const DdpgConfig& config, std::size_t steps);

}  // namespace autoenv::rl

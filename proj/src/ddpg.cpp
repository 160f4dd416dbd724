#include "autoenv/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "autoenv/errors.hpp"
#include "autoenv/hash.hpp"

namespace autoenv::rl {

void ObsNormalizer::apply(std::span<const double> in, std::span<double> out) const {
    if (empty()) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    if (in.size() != mean.size()) {
        throw UsageError("observation size does not match the normalizer");
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - mean[i]) / std[i];
}

std::vector<double> ObsNormalizer::apply(std::span<const double> in) const {
    std::vector<double> out(in.size());
    apply(in, out);
    return out;
}

ObsNormalizer ObsNormalizer::fit(std::span<const double> rows, std::size_t dim, double floor) {
    ObsNormalizer n;
    n.mean.assign(dim, 0.0);
    n.std.assign(dim, 1.0);
    if (dim == 0 || rows.empty()) {
        return n;
    }
    const std::size_t count = rows.size() / dim;
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < dim; ++c) n.mean[c] += rows[r * dim + c];
    }
    for (auto& m : n.mean) m /= static_cast<double>(count);
    std::vector<double> ss(dim, 0.0);
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t c = 0; c < dim; ++c) {
            const double d = rows[r * dim + c] - n.mean[c];
            ss[c] += d * d;
        }
    }
    for (std::size_t c = 0; c < dim; ++c) {
        const double sd = std::sqrt(ss[c] / static_cast<double>(count));
        // Constant features are only centered.
        n.std[c] = sd > floor ? sd : 1.0;
    }
    return n;
}

nlohmann::json to_json(const ObsNormalizer& n) { return {{"mean", n.mean}, {"std", n.std}}; }

ObsNormalizer normalizer_from_json(const nlohmann::json& doc) {
    ObsNormalizer n;
    n.mean = doc.at("mean").get<std::vector<double>>();
    n.std = doc.at("std").get<std::vector<double>>();
    if (n.mean.size() != n.std.size()) {
        throw ConfigError("normalizer mean/std size mismatch");
    }
    return n;
}

// ---------------------------------------------------------------------------

DdpgConfig DdpgConfig::paper_size() {
    DdpgConfig c;
    c.hidden = {256, 256, 256};
    return c;
}

void DdpgConfig::validate() const {
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0) || batch_size == 0 || memory_size == 0 || start_train == 0) {
        throw ConfigError("DDPG rates and sizes must be positive");
    }
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (!(noise_std >= 0.0)) throw ConfigError("noise std must be non-negative");
    if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end()) {
        throw ConfigError("hidden layer sizes must be positive");
    }
    if (checkpoint_fractions.empty()) throw ConfigError("at least one checkpoint fraction is required");
    for (double f : checkpoint_fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("checkpoint fractions must lie in (0, 1]");
    }
}

nlohmann::json to_json(const DdpgConfig& c) {
    return {{"actor_lr", c.actor_lr},
            {"critic_lr", c.critic_lr},
            {"batch_size", c.batch_size},
            {"gamma", c.gamma},
            {"memory_size", c.memory_size},
            {"noise_std", c.noise_std},
            {"start_train", c.start_train},
            {"tau", c.tau},
            {"hidden", c.hidden},
            {"double_precision", c.double_precision},
            {"checkpoint_fractions", c.checkpoint_fractions}};
}

DdpgConfig ddpg_config_from_json(const nlohmann::json& doc) {
    DdpgConfig c;
    try {
        c.actor_lr = doc.value("actor_lr", c.actor_lr);
        c.critic_lr = doc.value("critic_lr", c.critic_lr);
        c.batch_size = doc.value("batch_size", c.batch_size);
        c.gamma = doc.value("gamma", c.gamma);
        c.memory_size = doc.value("memory_size", c.memory_size);
        c.noise_std = doc.value("noise_std", c.noise_std);
        c.start_train = doc.value("start_train", c.start_train);
        c.tau = doc.value("tau", c.tau);
        c.hidden = doc.value("hidden", c.hidden);
        c.double_precision = doc.value("double_precision", c.double_precision);
        c.checkpoint_fractions = doc.value("checkpoint_fractions", c.checkpoint_fractions);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad DDPG config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim)
    : capacity_(capacity), od_(obs_dim), ad_(act_dim) {
    if (capacity == 0) {
        throw ConfigError("replay capacity must be positive");
    }
}

void ReplayBuffer::add(std::span<const double> obs, std::span<const double> action, double reward,
                       std::span<const double> next_obs, bool terminated) {
    if (obs.size() != od_ || next_obs.size() != od_ || action.size() != ad_) {
        throw UsageError("transition shape does not match the replay buffer");
    }
    if (size_ < capacity_) {
        // Grow lazily so a 1e6 capacity does not allocate up front.
        obs_.insert(obs_.end(), obs.begin(), obs.end());
        act_.insert(act_.end(), action.begin(), action.end());
        next_.insert(next_.end(), next_obs.begin(), next_obs.end());
        rew_.push_back(reward);
        done_.push_back(terminated ? 1 : 0);
        ++size_;
        head_ = size_ % capacity_;
        return;
    }
    std::copy(obs.begin(), obs.end(), obs_.begin() + static_cast<std::ptrdiff_t>(head_ * od_));
    std::copy(action.begin(), action.end(), act_.begin() + static_cast<std::ptrdiff_t>(head_ * ad_));
    std::copy(next_obs.begin(), next_obs.end(), next_.begin() + static_cast<std::ptrdiff_t>(head_ * od_));
    rew_[head_] = reward;
    done_[head_] = terminated ? 1 : 0;
    head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
    if (size_ == 0) {
        throw UsageError("sampling from an empty replay buffer");
    }
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

// ---------------------------------------------------------------------------

std::vector<double> act(const TrainedPolicy& policy, std::span<const double> observation, double noise_std,
                        std::mt19937_64* rng) {
    const auto x = policy.normalizer.apply(observation);
    const Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd y = policy.actor.forward(in);
    std::vector<double> a(static_cast<std::size_t>(y.rows()));
    std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = 0.5 * (y(static_cast<Eigen::Index>(i), 0) + 1.0);
        if (noise_std > 0.0) {
            if (!rng) throw UsageError("exploration noise requires an rng");
            a[i] += noise(*rng);
        }
        a[i] = std::clamp(a[i], 0.0, 1.0);
    }
    return a;
}

nlohmann::json to_json(const TrainedPolicy& p) {
    return {{"format_version", 1},
            {"sizes", p.actor.sizes()},
            {"output", "tanh"},
            {"params", p.actor.flatten()},
            {"normalizer", to_json(p.normalizer)},
            {"double_precision", p.double_precision},
            {"steps", p.steps},
            {"seed", p.seed}};
}

TrainedPolicy policy_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format_version").get<int>() != 1) {
            throw ConfigError("unsupported policy format version");
        }
        TrainedPolicy p;
        p.actor = Mlp<double>(doc.at("sizes").get<std::vector<std::size_t>>(), OutputActivation::tanh);
        p.actor.unflatten(doc.at("params").get<std::vector<double>>());
        p.normalizer = normalizer_from_json(doc.at("normalizer"));
        p.double_precision = doc.value("double_precision", false);
        p.steps = doc.value("steps", std::size_t{0});
        p.seed = doc.value("seed", std::uint64_t{0});
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed policy: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("malformed policy: ") + e.what());
    }
}

void save_policy(const TrainedPolicy& p, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw ConfigError("cannot write " + file.string());
    out << to_json(p).dump() << '\n';
}

TrainedPolicy load_policy(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read " + file.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed policy file " + file.string() + ": " + e.what());
    }
    return policy_from_json(doc);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

}  // namespace

template <class T>
DdpgAgent<T>::DdpgAgent(std::size_t obs_dim, std::size_t act_dim, const DdpgConfig& config, std::uint64_t seed)
    : actor(layer_sizes(obs_dim, config.hidden, act_dim), OutputActivation::tanh),
      critic(layer_sizes(obs_dim + act_dim, config.hidden, 1), OutputActivation::identity),
      config_(config),
      seed_(seed),
      obs_dim_(obs_dim),
      act_dim_(act_dim) {
    std::mt19937_64 rng(mix_seed(seed, 0xA11CE));
    actor.init(rng);
    critic.init(rng);
    actor_target = actor;
    critic_target = critic;
    actor_opt_ = Adam<T>(actor, config.actor_lr);
    critic_opt_ = Adam<T>(critic, config.critic_lr);
}

template <class T>
std::vector<double> DdpgAgent<T>::critic_targets(const ReplayBuffer& buffer, std::span<const std::size_t> batch) const {
    using Mat = typename Mlp<T>::Mat;
    const auto n = static_cast<Eigen::Index>(batch.size());
    const auto od = static_cast<Eigen::Index>(obs_dim_);
    const auto ad = static_cast<Eigen::Index>(act_dim_);
    Mat s2(od, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto next = buffer.next_obs(batch[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < od; ++i) s2(i, j) = static_cast<T>(next[static_cast<std::size_t>(i)]);
    }
    Mat x2(od + ad, n);
    x2.topRows(od) = s2;
    x2.bottomRows(ad) = (actor_target.forward(s2).array() + T(1)) * T(0.5);
    const Mat q2 = critic_target.forward(x2);
    std::vector<double> y(batch.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto k = batch[static_cast<std::size_t>(j)];
        const double cont = buffer.terminated(k) ? 0.0 : 1.0;
        y[static_cast<std::size_t>(j)] = buffer.reward(k) + config_.gamma * cont * static_cast<double>(q2(0, j));
    }
    return y;
}

template <class T>
UpdateStats DdpgAgent<T>::update(const ReplayBuffer& buffer, std::span<const std::size_t> batch) {
    using Mat = typename Mlp<T>::Mat;
    const auto n = static_cast<Eigen::Index>(batch.size());
    const auto od = static_cast<Eigen::Index>(obs_dim_);
    const auto ad = static_cast<Eigen::Index>(act_dim_);
    const T inv_n = T(1) / static_cast<T>(n);

    const auto y = critic_targets(buffer, batch);
    Mat x(od + ad, n);
    Mat target(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto k = batch[static_cast<std::size_t>(j)];
        const auto o = buffer.obs(k);
        const auto a = buffer.action(k);
        for (Eigen::Index i = 0; i < od; ++i) x(i, j) = static_cast<T>(o[static_cast<std::size_t>(i)]);
        for (Eigen::Index i = 0; i < ad; ++i) x(od + i, j) = static_cast<T>(a[static_cast<std::size_t>(i)]);
        target(0, j) = static_cast<T>(y[static_cast<std::size_t>(j)]);
    }

    UpdateStats stats;
    typename Mlp<T>::Cache cache;
    typename Mlp<T>::Grads grads;
    const Mat diff = critic.forward(x, cache) - target;
    stats.critic_loss = static_cast<double>(diff.squaredNorm() * inv_n);
    critic.backward(cache, (T(2) * inv_n) * diff, grads);
    critic_opt_.step(critic, grads);

    typename Mlp<T>::Cache actor_cache;
    const Mat s = x.topRows(od);
    const Mat pre = actor.forward(s, actor_cache);
    Mat xa(od + ad, n);
    xa.topRows(od) = s;
    xa.bottomRows(ad) = (pre.array() + T(1)) * T(0.5);
    const Mat q = critic.forward(xa, cache);
    stats.actor_loss = -static_cast<double>(q.sum() * inv_n);
    typename Mlp<T>::Grads unused;
    const Mat dx = critic.backward(cache, Mat::Constant(1, n, -inv_n), unused);
    const Mat da = dx.bottomRows(ad) * T(0.5);
    actor.backward(actor_cache, da, grads);
    actor_opt_.step(actor, grads);

    if (!std::isfinite(stats.critic_loss) || !std::isfinite(stats.actor_loss) || !actor.finite() ||
        !critic.finite()) {
        std::ostringstream os;
        os << "non-finite DDPG loss (critic " << stats.critic_loss << ", actor " << stats.actor_loss << ")";
        throw TrainingFailure(os.str());
    }
    soft_update(actor_target, actor, config_.tau);
    soft_update(critic_target, critic, config_.tau);
    return stats;
}

template <class T>
TrainedPolicy DdpgAgent<T>::snapshot(const ObsNormalizer& normalizer, std::size_t steps) const {
    TrainedPolicy p;
    p.actor = actor.template cast<double>();
    p.normalizer = normalizer;
    p.double_precision = std::is_same_v<T, double>;
    p.steps = steps;
    p.seed = seed_;
    return p;
}

template class DdpgAgent<float>;
template class DdpgAgent<double>;

// ---------------------------------------------------------------------------

std::vector<std::size_t> checkpoint_steps(const DdpgConfig& config, std::size_t steps) {
    std::vector<std::size_t> out;
    for (double f : config.checkpoint_fractions) {
        const auto s = static_cast<std::size_t>(std::llround(f * static_cast<double>(steps)));
        out.push_back(std::clamp<std::size_t>(s, 1, std::max<std::size_t>(steps, 1)));
    }
    return out;
}

namespace {

template <class T>
TrainResult train_impl(Environment& env, const DdpgConfig& config, const TrainOptions& options) {
    const std::size_t od = env.observation_dim();
    const std::size_t ad = env.action_dim();
    const ObsNormalizer normalizer = env.observation_normalizer();
    DdpgAgent<T> agent(od, ad, config, options.seed);
    ReplayBuffer buffer(config.memory_size, od, ad);
    std::mt19937_64 explore(mix_seed(options.seed, 1));
    std::mt19937_64 replay(mix_seed(options.seed, 2));
    env.seed(mix_seed(options.seed, 3));

    const auto cps = checkpoint_steps(config, options.steps);
    TrainResult result;
    result.checkpoint_steps = cps;
    result.checkpoints.resize(cps.size());

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, config.noise_std > 0.0 ? config.noise_std : 1.0);
    std::vector<double> obs = normalizer.apply(env.reset());
    std::vector<double> a(ad);
    typename Mlp<T>::Mat in(static_cast<Eigen::Index>(od), 1);
    double reward_sum = 0.0;

    for (std::size_t step = 1; step <= options.steps; ++step) {
        if (step <= config.start_train) {
            for (auto& v : a) v = unif(explore);
        } else {
            for (std::size_t i = 0; i < od; ++i) in(static_cast<Eigen::Index>(i), 0) = static_cast<T>(obs[i]);
            const auto y = agent.actor.forward(in);
            for (std::size_t i = 0; i < ad; ++i) {
                double v = 0.5 * (static_cast<double>(y(static_cast<Eigen::Index>(i), 0)) + 1.0);
                if (config.noise_std > 0.0) v += noise(explore);
                a[i] = std::clamp(v, 0.0, 1.0);
            }
        }
        const Transition tr = env.step(a);
        const auto next = normalizer.apply(tr.obs);
        buffer.add(obs, a, tr.reward, next, tr.terminated);
        reward_sum += tr.reward;
        if (step >= config.start_train) {
            const auto batch = buffer.sample_indices(config.batch_size, replay);
            result.last_update = agent.update(buffer, batch);
            ++result.updates;
        }
        obs = tr.terminated ? normalizer.apply(env.reset()) : next;

        for (std::size_t c = 0; c < cps.size(); ++c) {
            if (cps[c] == step) result.checkpoints[c] = agent.snapshot(normalizer, step);
        }
        if (options.eval_every > 0 && options.on_eval && step % options.eval_every == 0) {
            options.on_eval(step, agent.snapshot(normalizer, step));
        }
    }
    result.final_policy = agent.snapshot(normalizer, options.steps);
    for (std::size_t c = 0; c < cps.size(); ++c) {
        if (result.checkpoints[c].actor.layers() == 0) result.checkpoints[c] = result.final_policy;
    }
    result.mean_reward = options.steps > 0 ? reward_sum / static_cast<double>(options.steps) : 0.0;
    return result;
}

}  // namespace

TrainResult train(Environment& env, const DdpgConfig& config, const TrainOptions& options) {
    config.validate();
    return config.double_precision ? train_impl<double>(env, config, options)
                                   : train_impl<float>(env, config, options);
}

}  // namespace autoenv::rl

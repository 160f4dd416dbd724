#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <limits>
#include <set>

#include "autoenv/ddpg.hpp"
#include "autoenv/errors.hpp"
#include "support.hpp"

using namespace autoenv;
using namespace autoenv::rl;

TEST_CASE("replay buffer grows lazily and overwrites the oldest", "[ddpg]") {
    ReplayBuffer buf(3, 1, 1);
    CHECK(buf.size() == 0);
    for (int i = 0; i < 5; ++i) {
        const double v = i;
        buf.add(std::vector<double>{v}, std::vector<double>{v}, v, std::vector<double>{v + 1}, i % 2 == 0);
    }
    CHECK(buf.size() == 3);
    std::set<double> rewards;
    for (std::size_t i = 0; i < 3; ++i) rewards.insert(buf.reward(i));
    CHECK(rewards == std::set<double>{2.0, 3.0, 4.0});
    std::mt19937_64 rng(1);
    for (auto i : buf.sample_indices(100, rng)) CHECK(i < 3);
}

TEST_CASE("critic targets", "[ddpg]") {
    DdpgConfig c;
    c.gamma = 0.5;
    c.hidden = {4};
    DdpgAgent<double> agent(1, 1, c, 3);
    ReplayBuffer buf(4, 1, 1);
    buf.add(std::vector<double>{0.1}, std::vector<double>{0.2}, 1.0, std::vector<double>{0.3}, true);
    buf.add(std::vector<double>{0.1}, std::vector<double>{0.2}, 1.0, std::vector<double>{0.3}, false);
    const std::vector<std::size_t> batch = {0, 1};
    const auto y = agent.critic_targets(buf, batch);
    CHECK(y[0] == 1.0);
    using Mat = Mlp<double>::Mat;
    Mat s(1, 1);
    s(0, 0) = 0.3;
    const Mat pre = agent.actor_target.forward(s);
    Mat sa(2, 1);
    sa(0, 0) = 0.3;
    sa(1, 0) = (pre(0, 0) + 1.0) / 2.0;
    CHECK(y[1] == Catch::Approx(1.0 + 0.5 * agent.critic_target.forward(sa)(0, 0)));
}

TEST_CASE("config validation and JSON", "[ddpg]") {
    DdpgConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(DdpgConfig::paper_size().hidden == std::vector<std::size_t>{256, 256, 256});
    CHECK(to_json(ddpg_config_from_json(to_json(c))) == to_json(c));
    auto bad = c;
    bad.tau = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(checkpoint_steps(c, 10000) == std::vector<std::size_t>{6250, 7500, 8750, 10000});
}

TEST_CASE("training is deterministic in the seed and works in both precisions", "[ddpg]") {
    DdpgConfig c;
    c.start_train = 64;
    c.batch_size = 32;
    c.hidden = {16, 16};
    for (bool dp : {false, true}) {
        c.double_precision = dp;
        TrainResult runs[2];
        for (auto& r : runs) {
            testing::BanditEnv env;
            TrainOptions o;
            o.steps = 300;
            o.seed = 5;
            r = train(env, c, o);
        }
        CHECK(runs[0].final_policy.actor.flatten() == runs[1].final_policy.actor.flatten());
        CHECK(runs[0].updates == 300 - 64 + 1);
        CHECK(runs[0].checkpoints.size() == 4);
        CHECK(runs[0].final_policy.double_precision == dp);
        testing::BanditEnv env;
        TrainOptions o;
        o.steps = 300;
        o.seed = 6;
        CHECK(train(env, c, o).final_policy.actor.flatten() != runs[0].final_policy.actor.flatten());
    }
}

TEST_CASE("policies save and load", "[ddpg]") {
    DdpgAgent<float> agent(3, 2, DdpgConfig{}, 9);
    ObsNormalizer norm{{1, 2, 3}, {1, 1, 2}};
    const auto p = agent.snapshot(norm, 10);
    const auto path = std::filesystem::temp_directory_path() / "autoenv_policy.json";
    save_policy(p, path);
    const auto q = load_policy(path);
    std::filesystem::remove(path);
    CHECK(q.actor.flatten() == p.actor.flatten());
    CHECK(q.normalizer.mean == norm.mean);
    const std::vector<double> obs = {0.5, 0.1, -3.0};
    CHECK(act(q, obs) == act(p, obs));
    for (double a : act(p, obs)) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
    auto doc = to_json(p);
    doc["format_version"] = 7;
    CHECK_THROWS_AS(policy_from_json(doc), ConfigError);
}

TEST_CASE("non-finite losses abort with TrainingFailure", "[ddpg]") {
    DdpgConfig c;
    c.hidden = {4};
    DdpgAgent<double> agent(1, 1, c, 1);
    ReplayBuffer buf(2, 1, 1);
    buf.add(std::vector<double>{0.0}, std::vector<double>{0.5}, std::numeric_limits<double>::quiet_NaN(),
            std::vector<double>{0.0}, true);
    const std::vector<std::size_t> batch = {0};
    CHECK_THROWS_AS(agent.update(buf, batch), TrainingFailure);
}

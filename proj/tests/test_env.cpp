#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>
#include <set>

#include "autoenv/errors.hpp"
#include "autoenv/special_functions.hpp"
#include "support.hpp"

using namespace autoenv;
using namespace autoenv::env;

namespace {

NormStats random_stats(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.1, 3.0);
    NormStats s;
    s.mean_j = u(rng) - 1.5;
    s.std_j = u(rng);
    s.mean_p = u(rng);
    s.std_p = u(rng);
    return s;
}

}  // namespace

TEST_CASE("reward reduces to the weighted sum for the plain design", "[env][property]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_real_distribution<double> w(0.01, 0.99);
    std::bernoulli_distribution coin(0.5);
    for (int k = 0; k < 1000; ++k) {
        EnvDesign d = baseline_design(w(rng));
        const auto s = random_stats(rng);
        const double j = u(rng);
        const bool valid = coin(rng);
        const double p = valid ? 0.0 : std::abs(u(rng));
        const double j_norm = (j - s.mean_j) / s.std_j;
        const double p_norm = p / s.std_p;
        const double expected = (1.0 - d.penalty_weight) * -j_norm + d.penalty_weight * -p_norm;
        CHECK(compute_reward(d, s, j, 0.0, p, valid) == expected);

        // psi = 0: invalid rewards ignore the objective entirely.
        d.invalid_objective_share = 0.0;
        d.valid_reward = std::abs(u(rng));
        d.invalid_penalty = std::abs(u(rng));
        const double r0 = compute_reward(d, s, j, 0.0, p + 1.0, false);
        const double r1 = compute_reward(d, s, j + u(rng), 0.0, p + 1.0, false);
        CHECK(std::abs(r0 - r1) <= 1e-12);
    }
}

TEST_CASE("reward offsets and diff objective", "[env]") {
    NormStats s;
    s.mean_j = 1.0;
    s.std_j = 2.0;
    s.std_p = 0.5;
    EnvDesign d = baseline_design(0.25);
    d.valid_reward = 1.0;
    d.invalid_penalty = 0.5;
    d.invalid_objective_share = 0.5;
    // valid: J_norm = (5 - 1) / 2 = 2 -> 0.75 * -2 + 0.25 * 1
    CHECK(compute_reward(d, s, 5.0, 0.0, 0.0, true) == Catch::Approx(-1.25));
    // invalid: 0.75 * (-0.5 * 2) + 0.25 * (-(0.2 / 0.5) - 0.5)
    CHECK(compute_reward(d, s, 5.0, 0.0, 0.2, false) == Catch::Approx(-0.975));
    d.diff_objective = true;
    // J_eff = 5 - 4 = 1 -> J_norm = 0
    CHECK(compute_reward(d, s, 5.0, 4.0, 0.0, true) == Catch::Approx(0.25));
}

TEST_CASE("autoscaled actions hit the dynamic limits exactly", "[env][property]") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> wide(-0.5, 1.5);
    for (auto kind : opf::kAllBenchmarks) {
        const auto problem = opf::make_benchmark(kind);
        const auto nom = opf::nominal_box(problem);
        EnvDesign on;
        EnvDesign off;
        off.autoscaling = false;
        for (int k = 0; k < 2000; ++k) {
            const auto state = testing::random_state(problem, rng);
            const auto box = opf::dynamic_box(problem, state);
            const std::size_t d = problem.action_dim();
            CHECK(map_action(on, problem, state, std::vector<double>(d, 0.0)) == box.lo);
            CHECK(map_action(on, problem, state, std::vector<double>(d, 1.0)) == box.hi);
            std::vector<double> a(d);
            for (auto& x : a) x = wide(rng);
            const auto scaled = map_action(on, problem, state, a);
            const auto clipped = map_action(off, problem, state, a);
            for (std::size_t i = 0; i < d; ++i) {
                const double c = std::clamp(a[i], 0.0, 1.0);
                CHECK(scaled[i] >= box.lo[i]);
                CHECK(scaled[i] <= box.hi[i]);
                CHECK(clipped[i] == std::clamp(c * (nom.hi[i] - nom.lo[i]) + nom.lo[i], box.lo[i], box.hi[i]));
            }
        }
    }
    const auto problem = opf::make_benchmark(opf::BenchmarkKind::voltage_control);
    std::mt19937_64 r2(1);
    const auto state = testing::random_state(problem, r2);
    CHECK_THROWS_AS(map_action(EnvDesign{}, problem, state, std::vector<double>(1, 0.5)), UsageError);
}

TEST_CASE("data mixture follows the shares", "[env][property]") {
    const auto data = testing::small_env_data(opf::BenchmarkKind::economic_dispatch);
    EnvDesign d;
    d.normal_data = 1.0 / 3.0;
    d.uniform_data = 1.0 / 3.0;
    d.realistic_data = 1.0 / 3.0;
    std::mt19937_64 rng(99);
    double counts[3] = {0, 0, 0};
    const int n = 30000;
    for (int k = 0; k < n; ++k) counts[static_cast<int>(sample_state(d, *data, rng).branch)] += 1.0;
    double x2 = 0.0;
    for (double c : counts) x2 += (c - n / 3.0) * (c - n / 3.0) / (n / 3.0);
    const double p = stats::chi_squared_sf(x2, 2);
    CHECK(p == Catch::Approx(boost::math::cdf(boost::math::complement(boost::math::chi_squared(2), x2))).epsilon(1e-9));
    CHECK(p > 0.01);

    for (int branch = 0; branch < 3; ++branch) {
        EnvDesign single;
        single.realistic_data = branch == 0 ? 1.0 : 0.0;
        single.normal_data = branch == 1 ? 1.0 : 0.0;
        single.uniform_data = branch == 2 ? 1.0 : 0.0;
        for (int k = 0; k < 500; ++k) CHECK(static_cast<int>(sample_state(single, *data, rng).branch) == branch);
    }
}

TEST_CASE("realistic draws come from the training split", "[env]") {
    const auto data = testing::small_env_data(opf::BenchmarkKind::voltage_control);
    std::set<std::uint64_t> train;
    for (auto r : data->rows(Mode::train)) train.insert(data->state_at_row(r).hash());
    std::mt19937_64 rng(4);
    for (int k = 0; k < 200; ++k) CHECK(train.count(sample_state(EnvDesign{}, *data, rng).state.hash()) == 1);
}

TEST_CASE("observation layout", "[env]") {
    const auto data = testing::small_env_data(opf::BenchmarkKind::q_market);
    const auto& problem = data->problem;
    const auto& g = problem.grid();
    EnvDesign d;
    const std::size_t base = observation_size(d, problem);
    d.add_voltage_magnitude = true;
    d.add_voltage_angle = true;
    d.add_line_loading = true;
    d.add_trafo_loading = true;
    d.add_slack_power = true;
    CHECK(observation_size(d, problem) == base + 2 * g.bus_count() + g.lines.size() + g.transformers.size() + 2);
    const auto state = data->state_at_row(data->rows(Mode::train)[0]);
    const auto flow = opf::simulate(problem, state, opf::initial_setpoints(problem, state)).flow;
    auto obs = build_observation(d, problem, state, flow);
    CHECK(obs.values.size() == observation_size(d, problem));
    CHECK_FALSE(obs.flow_failed);
    grid::PowerFlowSolution failed;
    obs = build_observation(d, problem, state, failed);
    CHECK(obs.flow_failed);
    CHECK(obs.values.size() == observation_size(d, problem));
    for (std::size_t i = base; i < obs.values.size(); ++i) CHECK(obs.values[i] == 0.0);
}

TEST_CASE("calibration and episodes", "[env]") {
    const auto data = testing::small_env_data(opf::BenchmarkKind::voltage_control);
    EnvDesign d;
    d.steps_per_episode = 3;
    std::mt19937_64 rng(6);
    CHECK_THROWS_AS(calibrate_normalization(d, *data, 50, rng), ConfigError);
    const auto stats = calibrate_normalization(d, *data, 200, rng);
    CHECK(stats.std_j >= kStdFloor);
    CHECK(stats.std_p >= kStdFloor);
    CHECK(stats.observation.mean.size() == observation_size(d, data->problem));
    CHECK(to_json(norm_stats_from_json(to_json(stats))) == to_json(stats));

    OpfEnv e(data, d, stats, 1);
    std::vector<double> a(e.action_dim(), 0.5);
    CHECK_THROWS_AS(e.step(a), UsageError);
    const auto obs = e.reset();
    CHECK(obs.size() == e.observation_dim());
    for (int s = 0; s < 3; ++s) {
        const auto t = e.step(a);
        CHECK(t.terminated == (s == 2));
        const auto& info = e.last_info();
        const double j = info.converged ? info.objective : stats.mean_j;
        if (info.converged) CHECK(t.reward == compute_reward(d, stats, j, 0.0, info.penalty, info.valid));
    }
    CHECK_THROWS_AS(e.step(a), UsageError);

    CHECK_THROWS_AS(e.reset(Mode::validation, 20), UsageError);
    auto baselines = std::make_shared<std::vector<opf::BaselineSolution>>(20);
    (*baselines)[3].objective = 1.5;
    (*baselines)[3].valid = true;
    e.attach_baselines(Mode::validation, baselines);
    CHECK_THROWS_AS(e.attach_baselines(Mode::test, baselines), UsageError);
    e.reset(Mode::validation, 3);
    CHECK(e.state().hash() == data->state_at_row(data->rows(Mode::validation)[3]).hash());
    e.step(a);
    CHECK(e.last_info().baseline_objective == 1.5);
    CHECK(e.last_info().baseline_valid == true);
}

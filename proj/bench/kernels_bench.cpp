// Serial vs OpenMP versions of the per-state kernels on the default feeder.

#include <memory>
#include <random>

#include <benchmark/benchmark.h>

#include "autoenv/datasets.hpp"
#include "autoenv/kernels.hpp"

using namespace autoenv;

namespace {

struct Fixture {
    std::shared_ptr<const env::EnvData> data;
    std::vector<opf::GridState> states;
    opf::BaselineBudget budget;
    env::EnvDesign design;
    env::NormStats stats;
    rl::TrainedPolicy policy;
    std::vector<opf::BaselineSolution> baselines;

    Fixture() {
        auto problem = opf::make_benchmark(opf::BenchmarkKind::voltage_control);
        auto dataset = data::generate_timeseries(problem.timeseries_config(400), 1);
        data::SplitSpec spec;
        spec.train_size = 80;
        spec.validation_size = 16;
        auto splits = data::nested_split(dataset, spec);
        data = env::make_env_data(std::move(problem), std::move(dataset), std::move(splits));
        for (auto r : data->rows(env::Mode::validation)) states.push_back(data->state_at_row(r));
        budget.starts = 2;
        std::mt19937_64 rng(5);
        stats = env::calibrate_normalization(design, *data, 100, rng);
        env::OpfEnv e(data, design, stats, 0);
        policy.actor = rl::Mlp<double>({e.observation_dim(), 16, e.action_dim()}, rl::OutputActivation::tanh);
        policy.actor.init(rng);
        policy.normalizer = stats.observation;
        baselines = kernels::solve_baselines_serial(data->problem, states, budget);
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_BaselinesSerial(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) benchmark::DoNotOptimize(kernels::solve_baselines_serial(f.data->problem, f.states, f.budget));
}

void BM_BaselinesOpenMP(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) benchmark::DoNotOptimize(kernels::solve_baselines(f.data->problem, f.states, f.budget, 0));
}

void BM_RolloutSerial(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) {
        benchmark::DoNotOptimize(
            kernels::rollout_serial(f.policy, f.data, f.design, f.stats, env::Mode::validation, f.baselines));
    }
}

void BM_RolloutOpenMP(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) {
        benchmark::DoNotOptimize(
            kernels::rollout(f.policy, f.data, f.design, f.stats, env::Mode::validation, f.baselines, 0));
    }
}

}  // namespace

BENCHMARK(BM_BaselinesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BaselinesOpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutOpenMP)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

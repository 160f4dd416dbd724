#include "autoenv/kernels.hpp"

#include <exception>
#include <mutex>

#include <omp.h>

#include "autoenv/errors.hpp"

namespace autoenv::kernels {

namespace {

/// Captures the first exception thrown inside a parallel region.
class ErrorSlot {
public:
    template <class F>
    void run(F&& f) noexcept {
        try {
            f();
        } catch (...) {
            std::lock_guard lock(mutex_);
            if (!error_) error_ = std::current_exception();
        }
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

int thread_count(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

metrics::StateRecord rollout_one(const rl::TrainedPolicy& policy, env::OpfEnv& e, env::Mode mode, std::size_t i,
                                 const std::vector<opf::BaselineSolution>& baselines) {
    auto obs = e.reset(mode, i);
    while (!e.terminated()) {
        obs = e.step(rl::act(policy, obs)).obs;
    }
    const auto& info = e.last_info();
    metrics::StateRecord r;
    r.index = i;
    r.objective = info.objective;
    r.valid = info.valid;
    r.baseline_objective = baselines[i].objective;
    r.baseline_valid = baselines[i].valid;
    return r;
}

void check_sizes(const env::EnvData& data, env::Mode mode, const std::vector<opf::BaselineSolution>& baselines) {
    if (baselines.size() != data.rows(mode).size()) {
        throw UsageError("baseline solutions missing for part of the split");
    }
}

}  // namespace

std::vector<opf::BaselineSolution> solve_baselines_serial(const opf::OpfProblem& problem,
                                                          const std::vector<opf::GridState>& states,
                                                          const opf::BaselineBudget& budget) {
    std::vector<opf::BaselineSolution> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(opf::baseline_solve(problem, s, budget));
    return out;
}

std::vector<opf::BaselineSolution> solve_baselines(const opf::OpfProblem& problem,
                                                   const std::vector<opf::GridState>& states,
                                                   const opf::BaselineBudget& budget, int threads) {
    std::vector<opf::BaselineSolution> out(states.size());
    ErrorSlot err;
    const auto n = static_cast<long>(states.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(threads))
    for (long i = 0; i < n; ++i) {
        err.run([&] { out[static_cast<std::size_t>(i)] = opf::baseline_solve(problem, states[i], budget); });
    }
    err.rethrow();
    return out;
}

std::vector<opf::BaselineSolution> baselines_for_split(const env::EnvData& data, env::Mode mode,
                                                       const opf::BaselineBudget& budget, opf::BaselineCache* cache,
                                                       int threads) {
    const auto& rows = data.rows(mode);
    const auto problem_hash = data.problem.hash();
    std::vector<opf::BaselineSolution> out(rows.size());
    std::vector<opf::GridState> missing;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto state = data.state_at_row(rows[i]);
        if (cache) {
            if (auto hit = cache->find(problem_hash, state.hash(), budget.seed)) {
                out[i] = *hit;
                continue;
            }
        }
        missing.push_back(std::move(state));
        where.push_back(i);
    }
    if (!missing.empty()) {
        auto solved = solve_baselines(data.problem, missing, budget, threads);
        for (std::size_t k = 0; k < solved.size(); ++k) {
            if (cache) cache->insert(problem_hash, missing[k].hash(), budget.seed, solved[k]);
            out[where[k]] = std::move(solved[k]);
        }
        if (cache) cache->flush();
    }
    return out;
}

std::vector<metrics::StateRecord> rollout_serial(const rl::TrainedPolicy& policy,
                                                 std::shared_ptr<const env::EnvData> data,
                                                 const env::EnvDesign& design, const env::NormStats& stats,
                                                 env::Mode mode,
                                                 const std::vector<opf::BaselineSolution>& baselines) {
    check_sizes(*data, mode, baselines);
    env::OpfEnv e(data, design, stats);
    std::vector<metrics::StateRecord> out;
    const std::size_t n = data->rows(mode).size();
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(rollout_one(policy, e, mode, i, baselines));
    return out;
}

std::vector<metrics::StateRecord> rollout(const rl::TrainedPolicy& policy, std::shared_ptr<const env::EnvData> data,
                                          const env::EnvDesign& design, const env::NormStats& stats, env::Mode mode,
                                          const std::vector<opf::BaselineSolution>& baselines, int threads) {
    check_sizes(*data, mode, baselines);
    const auto n = static_cast<long>(data->rows(mode).size());
    std::vector<metrics::StateRecord> out(static_cast<std::size_t>(n));
    ErrorSlot err;
#pragma omp parallel num_threads(thread_count(threads))
    {
        env::OpfEnv e(data, design, stats);
#pragma omp for schedule(static)
        for (long i = 0; i < n; ++i) {
            err.run([&] {
                out[static_cast<std::size_t>(i)] = rollout_one(policy, e, mode, static_cast<std::size_t>(i), baselines);
            });
        }
    }
    err.rethrow();
    return out;
}

}  // namespace autoenv::kernels

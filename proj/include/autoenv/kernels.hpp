#pragma once

// Per-state batch kernels. Each has an OpenMP version and a serial reference
// that must agree exactly.

#include <memory>
#include <vector>

#include "autoenv/ddpg.hpp"
#include "autoenv/env.hpp"
#include "autoenv/metrics.hpp"
#include "autoenv/opf.hpp"

namespace autoenv::kernels {

[[nodiscard]] std::vector<opf::BaselineSolution> solve_baselines_serial(const opf::OpfProblem& problem,
                                                                        const std::vector<opf::GridState>& states,
                                                                        const opf::BaselineBudget& budget);

/// threads <= 0 uses the OpenMP default.
[[nodiscard]] std::vector<opf::BaselineSolution> solve_baselines(const opf::OpfProblem& problem,
                                                                 const std::vector<opf::GridState>& states,
                                                                 const opf::BaselineBudget& budget, int threads = 0);

/// Baselines for every row of a split; the cache (optional) is consulted and filled.
[[nodiscard]] std::vector<opf::BaselineSolution> baselines_for_split(const env::EnvData& data, env::Mode mode,
                                                                     const opf::BaselineBudget& budget,
                                                                     opf::BaselineCache* cache = nullptr,
                                                                     int threads = 0);

[[nodiscard]] std::vector<metrics::StateRecord> rollout_serial(const rl::TrainedPolicy& policy,
                                                               std::shared_ptr<const env::EnvData> data,
                                                               const env::EnvDesign& design,
                                                               const env::NormStats& stats, env::Mode mode,
                                                               const std::vector<opf::BaselineSolution>& baselines);

[[nodiscard]] std::vector<metrics::StateRecord> rollout(const rl::TrainedPolicy& policy,
                                                        std::shared_ptr<const env::EnvData> data,
                                                        const env::EnvDesign& design, const env::NormStats& stats,
                                                        env::Mode mode,
                                                        const std::vector<opf::BaselineSolution>& baselines,
                                                        int threads = 0);

}  // namespace autoenv::kernels

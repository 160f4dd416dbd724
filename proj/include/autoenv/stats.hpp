#pragma once

// Hypothesis tests over trial splits: which design variables go with good trials.

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoenv/hpo.hpp"

namespace autoenv::stats {

inline constexpr double kSignificanceLevel = 0.05;

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    bool degenerate = false;  // both variances zero
};

/// Two-sided Welch test. Each sample needs at least two values (UsageError otherwise).
[[nodiscard]] WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct ChiSquaredResult {
    double statistic = 0.0;
    int dof = 0;
    double p = 1.0;
    bool degenerate = false;  // a zero row or column margin
};

/// Pearson test of a 2 x k contingency table given as its two rows.
[[nodiscard]] ChiSquaredResult chi_squared_test(std::span<const double> row0, std::span<const double> row1);

struct FisherResult {
    double statistic = 0.0;
    int dof = 0;
    double p = 1.0;
};

/// X^2 = -2 sum ln p_i against chi-squared with 2k dof; p floored at 1e-300.
[[nodiscard]] FisherResult fisher_combine(std::span<const double> p_values);

struct TrialSplit {
    std::vector<const hpo::TrialRecord*> top;
    std::vector<const hpo::TrialRecord*> rest;
};

/// Over rankable trials only. Pareto: rank 0 vs the rest; otherwise the top
/// round(fraction * n) (at least one) under the criterion.
[[nodiscard]] TrialSplit split_trials(const std::vector<hpo::TrialRecord>& trials, hpo::Criterion criterion,
                                      double fraction = 0.2);

struct SignificanceEntry {
    std::string environment;
    std::string variable;
    hpo::Criterion criterion = hpo::Criterion::pareto;
    std::string test;  // "welch", "chi-squared", "fisher" or "untestable"
    double p = 1.0;
    bool significant = false;
    bool degenerate = false;
    std::size_t n_top = 0;
    std::size_t n_rest = 0;
    double top_mean = 0.0;   // floats
    double rest_mean = 0.0;  // floats
    std::vector<double> values;                 // discretes: observed values
    std::vector<std::vector<double>> counts;    // discretes: [top, rest] x values
    double top_value = 0.0;  // mean (floats) or dominant value (discretes) of the top group
    std::string note;
};

struct SignificanceReport {
    std::vector<SignificanceEntry> entries;
    double fraction = 0.2;
    std::string note = "per-test p-values, no multiple-testing correction";
};

struct EnvironmentTrials {
    std::string name;
    std::vector<hpo::TrialRecord> trials;
};

/// Every variable of the space under every criterion, per environment. With
/// more than one environment, Pareto p-values are also Fisher-combined
/// (environment "combined").
[[nodiscard]] SignificanceReport significance_report(const std::vector<EnvironmentTrials>& studies,
                                                     const env::DesignSpace& space,
                                                     const std::vector<hpo::Criterion>& criteria,
                                                     double fraction = 0.2);

[[nodiscard]] nlohmann::json to_json(const SignificanceReport& r);
/// environment,variable,criterion,test,p,significant,n_top,n_rest,top_value,rest_mean,note
[[nodiscard]] std::string to_csv(const SignificanceReport& r);

}  // namespace autoenv::stats

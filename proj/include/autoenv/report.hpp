#pragma once

// Deterministic SVG and CSV emission for studies and learning curves.

#include <string>
#include <utility>
#include <vector>

#include "autoenv/hpo.hpp"

namespace autoenv::report {

/// id, tag, status, metrics, stds, then every design variable.
[[nodiscard]] std::string trials_csv(const std::vector<hpo::TrialRecord>& trials);

/// Invalid share (x) vs mean error (y): non-dominated red, dominated blue,
/// baseline green, seed mean +- std as a cross on every point.
[[nodiscard]] std::string pareto_svg(const std::vector<hpo::TrialRecord>& trials,
                                     const std::vector<hpo::TrialRecord>& baselines, const std::string& title);

struct Curve {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (step, value)
};

[[nodiscard]] std::string curves_svg(const std::vector<Curve>& curves, const std::string& title,
                                     const std::string& y_label);
/// label,step,value
[[nodiscard]] std::string curves_csv(const std::vector<Curve>& curves);

/// Mean of each value and its up to window-1 predecessors.
[[nodiscard]] std::vector<double> rolling_average(const std::vector<double>& values, std::size_t window = 2);

/// Fixed-precision number formatting used by every emitter.
[[nodiscard]] std::string fmt(double v, int precision = 6);

}  // namespace autoenv::report

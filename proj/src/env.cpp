#include "autoenv/env.hpp"

#include <algorithm>
#include <cmath>

#include "autoenv/errors.hpp"

namespace autoenv::env {

using opf::GridState;
using opf::OpfProblem;

const char* to_string(Mode m) {
    switch (m) {
        case Mode::train: return "train";
        case Mode::validation: return "validation";
        case Mode::test: return "test";
    }
    return "?";
}

const std::vector<std::size_t>& EnvData::rows(Mode m) const {
    switch (m) {
        case Mode::train: return splits.train;
        case Mode::validation: return splits.validation;
        case Mode::test: return splits.test;
    }
    return splits.train;
}

GridState EnvData::state_at_row(std::size_t row) const {
    if (row >= dataset.length()) {
        throw UsageError("dataset row out of range");
    }
    return opf::make_state(problem, dataset.unit_row(row), dataset.price_row(row));
}

std::shared_ptr<const EnvData> make_env_data(OpfProblem problem, data::Dataset dataset, data::Splits splits) {
    if (dataset.unit_count() != problem.grid().units.size() || dataset.price_count() != problem.price_channels()) {
        throw ConfigError("dataset columns do not match the problem");
    }
    auto d = std::make_shared<EnvData>();
    d->problem = std::move(problem);
    d->dataset = std::move(dataset);
    d->splits = std::move(splits);
    const std::size_t nu = d->dataset.unit_count();
    const std::size_t nc = d->dataset.price_count();
    d->normal_mean.assign(nu + nc, 0.0);
    d->normal_std.assign(nu + nc, kStdFloor);
    const auto& train = d->splits.train;
    if (!train.empty()) {
        auto column = [&](std::size_t c, std::size_t row) {
            return c < nu ? d->dataset.unit_row(row)[c] : d->dataset.price_row(row)[c - nu];
        };
        for (std::size_t c = 0; c < nu + nc; ++c) {
            double sum = 0.0;
            for (auto r : train) sum += column(c, r);
            const double mean = sum / static_cast<double>(train.size());
            double ss = 0.0;
            for (auto r : train) ss += (column(c, r) - mean) * (column(c, r) - mean);
            d->normal_mean[c] = mean;
            d->normal_std[c] = std::max(kStdFloor, std::sqrt(ss / static_cast<double>(train.size())));
        }
    }
    return d;
}

SampledState sample_state(const EnvDesign& design, const EnvData& data, std::mt19937_64& rng) {
    const auto& train = data.splits.train;
    if (design.realistic_data > 0.0 && train.empty()) {
        throw ConfigError("realistic data share > 0 but the training split is empty");
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    SampledState out;
    if (u < design.realistic_data) {
        out.branch = Branch::realistic;
    } else if (u < design.realistic_data + design.normal_data) {
        out.branch = Branch::normal;
    } else {
        out.branch = Branch::uniform;
    }
    if (out.branch == Branch::uniform && design.uniform_data <= 0.0) {
        // Rounding residue of the shares; fall back to the branch with mass.
        out.branch = design.realistic_data > 0.0 ? Branch::realistic : Branch::normal;
    }
    const std::size_t nu = data.dataset.unit_count();
    const std::size_t nc = data.dataset.price_count();
    std::vector<double> units(nu);
    std::vector<double> prices(nc);
    switch (out.branch) {
        case Branch::realistic: {
            const auto row = train[std::uniform_int_distribution<std::size_t>(0, train.size() - 1)(rng)];
            out.state = data.state_at_row(row);
            return out;
        }
        case Branch::normal: {
            std::normal_distribution<double> z(0.0, 1.0);
            for (std::size_t c = 0; c < nu + nc; ++c) {
                const double v = std::clamp(data.normal_mean[c] + data.normal_std[c] * z(rng), 0.0, 1.0);
                (c < nu ? units[c] : prices[c - nu]) = v;
            }
            break;
        }
        case Branch::uniform:
            for (auto& v : units) v = unif(rng);
            for (auto& v : prices) v = unif(rng);
            break;
    }
    out.state = opf::make_state(data.problem, units, prices);
    return out;
}

std::size_t observation_size(const EnvDesign& design, const OpfProblem& problem) {
    const auto& g = problem.grid();
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.units.size(); ++i) {
        if (!problem.is_controllable_unit(i)) n += 2;
    }
    n += 3 * problem.action_dim();
    if (design.add_voltage_magnitude) n += g.bus_count();
    if (design.add_voltage_angle) n += g.bus_count();
    if (design.add_line_loading) n += g.lines.size();
    if (design.add_trafo_loading) n += g.transformers.size();
    if (design.add_slack_power) n += 2;
    return n;
}

Observation build_observation(const EnvDesign& design, const OpfProblem& problem, const GridState& state,
                              const grid::PowerFlowSolution& flow) {
    const auto& g = problem.grid();
    Observation obs;
    obs.values.reserve(observation_size(design, problem));
    for (std::size_t i = 0; i < g.units.size(); ++i) {
        if (!problem.is_controllable_unit(i)) {
            obs.values.push_back(state.p[i]);
            obs.values.push_back(state.q[i]);
        }
    }
    const auto box = opf::dynamic_box(problem, state);
    for (std::size_t a = 0; a < problem.action_dim(); ++a) {
        obs.values.push_back(box.lo[a]);
        obs.values.push_back(box.hi[a]);
        obs.values.push_back(state.prices[a]);
    }
    obs.flow_failed = !flow.converged;
    auto block = [&](bool on, const std::vector<double>& values, std::size_t n) {
        if (!on) return;
        for (std::size_t i = 0; i < n; ++i) {
            obs.values.push_back(obs.flow_failed ? 0.0 : values[i]);
        }
    };
    block(design.add_voltage_magnitude, flow.vm_pu, g.bus_count());
    block(design.add_voltage_angle, flow.va_rad, g.bus_count());
    block(design.add_line_loading, flow.line_loading, g.lines.size());
    block(design.add_trafo_loading, flow.trafo_loading, g.transformers.size());
    if (design.add_slack_power) {
        obs.values.push_back(obs.flow_failed ? 0.0 : flow.slack_p_mw);
        obs.values.push_back(obs.flow_failed ? 0.0 : flow.slack_q_mvar);
    }
    return obs;
}

std::vector<double> map_action(const EnvDesign& design, const OpfProblem& problem, const GridState& state,
                               std::span<const double> action) {
    const std::size_t d = problem.action_dim();
    if (action.size() != d) {
        throw UsageError("action dimension mismatch");
    }
    const auto dyn = opf::dynamic_box(problem, state);
    std::vector<double> u(d);
    if (design.autoscaling) {
        for (std::size_t i = 0; i < d; ++i) {
            const double a = std::clamp(action[i], 0.0, 1.0);
            u[i] = a * (dyn.hi[i] - dyn.lo[i]) + dyn.lo[i];
            if (a == 1.0) u[i] = dyn.hi[i];
        }
    } else {
        const auto nom = opf::nominal_box(problem);
        for (std::size_t i = 0; i < d; ++i) {
            const double a = std::clamp(action[i], 0.0, 1.0);
            u[i] = std::clamp(a * (nom.hi[i] - nom.lo[i]) + nom.lo[i], dyn.lo[i], dyn.hi[i]);
        }
    }
    return u;
}

double compute_reward(const EnvDesign& design, const NormStats& stats, double j, double j_init, double penalty,
                      bool valid) {
    const double j_eff = design.diff_objective ? j - j_init : j;
    const double j_norm = (j_eff - stats.mean_j) / stats.std_j;
    const double p_norm = penalty / stats.std_p;
    const double j_hat = valid ? -j_norm : -design.invalid_objective_share * j_norm;
    const double p_hat = valid ? design.valid_reward : -p_norm - design.invalid_penalty;
    return (1.0 - design.penalty_weight) * j_hat + design.penalty_weight * p_hat;
}

NormStats calibrate_normalization(const EnvDesign& design, const EnvData& data, std::size_t n_samples,
                                  std::mt19937_64& rng) {
    if (n_samples < 100) {
        throw ConfigError("calibration needs at least 100 samples");
    }
    const auto& problem = data.problem;
    const std::size_t dim = observation_size(design, problem);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> js;
    std::vector<double> ps;
    std::vector<double> obs_rows;
    js.reserve(n_samples);
    ps.reserve(n_samples);
    obs_rows.reserve(n_samples * dim);
    std::size_t attempts = 0;
    while (ps.size() < n_samples) {
        if (++attempts > 20 * n_samples) {
            throw TrainingFailure("calibration: too many diverged initial power flows");
        }
        const auto sampled = sample_state(design, data, rng);
        const auto& state = sampled.state;
        const auto init = opf::simulate(problem, state, opf::initial_setpoints(problem, state));
        if (!init.flow.converged) {
            continue;
        }
        std::vector<double> action(problem.action_dim());
        for (auto& a : action) a = unif(rng);
        const auto sim = opf::simulate(problem, state, map_action(design, problem, state, action));
        if (sim.flow.converged) {
            js.push_back(design.diff_objective ? sim.objective - init.objective : sim.objective);
        }
        ps.push_back(sim.penalty);
        const auto obs = build_observation(design, problem, state, init.flow);
        obs_rows.insert(obs_rows.end(), obs.values.begin(), obs.values.end());
    }
    auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
        if (v.empty()) {
            mean = 0.0;
            sd = kStdFloor;
            return;
        }
        double s = 0.0;
        for (double x : v) s += x;
        mean = s / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = std::max(kStdFloor, std::sqrt(ss / static_cast<double>(v.size())));
    };
    NormStats stats;
    mean_std(js, stats.mean_j, stats.std_j);
    mean_std(ps, stats.mean_p, stats.std_p);
    stats.samples = n_samples;
    stats.observation = rl::ObsNormalizer::fit(obs_rows, dim);
    return stats;
}

nlohmann::json to_json(const NormStats& s) {
    return {{"mean_j", s.mean_j},   {"std_j", s.std_j},     {"mean_p", s.mean_p},
            {"std_p", s.std_p},     {"samples", s.samples}, {"observation", rl::to_json(s.observation)}};
}

NormStats norm_stats_from_json(const nlohmann::json& doc) {
    NormStats s;
    s.mean_j = doc.at("mean_j").get<double>();
    s.std_j = doc.at("std_j").get<double>();
    s.mean_p = doc.at("mean_p").get<double>();
    s.std_p = doc.at("std_p").get<double>();
    s.samples = doc.value("samples", std::size_t{0});
    s.observation = rl::normalizer_from_json(doc.at("observation"));
    return s;
}

// ---------------------------------------------------------------------------

OpfEnv::OpfEnv(std::shared_ptr<const EnvData> data, EnvDesign design, NormStats stats, std::uint64_t seed)
    : data_(std::move(data)), design_(design), stats_(std::move(stats)), rng_(seed) {
    if (!data_) {
        throw UsageError("environment without data");
    }
}

std::size_t OpfEnv::observation_dim() const { return observation_size(design_, data_->problem); }
std::size_t OpfEnv::action_dim() const { return data_->problem.action_dim(); }
void OpfEnv::seed(std::uint64_t seed) { rng_.seed(seed); }

void OpfEnv::attach_baselines(Mode mode, std::shared_ptr<const std::vector<opf::BaselineSolution>> baselines) {
    if (baselines && baselines->size() != data_->rows(mode).size()) {
        throw UsageError("baseline count does not match the split");
    }
    baselines_[static_cast<int>(mode)] = std::move(baselines);
}

void OpfEnv::begin_episode(GridState state) {
    state_ = std::move(state);
    const auto& problem = data_->problem;
    const auto init = opf::simulate(problem, state_, opf::initial_setpoints(problem, state_));
    initial_failed_ = !init.flow.converged;
    j_init_ = initial_failed_ ? 0.0 : init.objective;
    observation_ = build_observation(design_, problem, state_, init.flow).values;
    step_index_ = 0;
    started_ = true;
    terminated_ = false;
}

std::vector<double> OpfEnv::reset(Mode mode, std::optional<std::size_t> index) {
    mode_ = mode;
    if (mode == Mode::train) {
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 1000) {
                throw TrainingFailure("no training state with a converging initial power flow");
            }
            begin_episode(sample_state(design_, *data_, rng_).state);
            if (!initial_failed_) break;
            ++resampled_;
        }
    } else {
        const auto& rows = data_->rows(mode);
        const std::size_t i = index.value_or(0);
        if (i >= rows.size()) {
            throw UsageError(std::string("index out of range for the ") + to_string(mode) + " split");
        }
        index_ = i;
        begin_episode(data_->state_at_row(rows[i]));
    }
    return observation_;
}

rl::Transition OpfEnv::step(std::span<const double> action) {
    if (!started_ || terminated_) {
        throw UsageError("step() on a terminated episode; call reset() first");
    }
    const auto& problem = data_->problem;
    info_ = {};
    info_.setpoints = map_action(design_, problem, state_, action);
    const auto sim = opf::simulate(problem, state_, info_.setpoints);
    info_.converged = sim.flow.converged;
    info_.valid = sim.report.valid && !initial_failed_;
    info_.objective = sim.objective;
    info_.penalty = sim.penalty;
    if (const auto& b = baselines_[static_cast<int>(mode_)]; b && mode_ != Mode::train) {
        info_.baseline_objective = (*b)[index_].objective;
        info_.baseline_valid = (*b)[index_].valid;
    }
    // A diverged flow has no objective; hold the objective term at its mean.
    const double j_eff_mean = stats_.mean_j + (design_.diff_objective ? j_init_ : 0.0);
    const double j = sim.flow.converged ? sim.objective : j_eff_mean;
    rl::Transition t;
    t.reward = compute_reward(design_, stats_, j, j_init_, sim.penalty, info_.valid);
    ++step_index_;
    terminated_ = step_index_ >= design_.steps_per_episode;
    observation_ = build_observation(design_, problem, state_, sim.flow).values;
    t.obs = observation_;
    t.terminated = terminated_;
    return t;
}

}  // namespace autoenv::env

#pragma once

// Shared fixtures for the unit tests and the acceptance runner.

#include <cmath>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "autoenv/datasets.hpp"
#include "autoenv/env.hpp"
#include "autoenv/grid.hpp"
#include "autoenv/opf.hpp"
#include "autoenv/rl.hpp"

namespace autoenv::testing {

/// Lossless slack-to-load line with reactance x (p.u.) on base_mva.
inline grid::Grid two_bus_grid(double x, double base_mva) {
    grid::Grid g;
    g.base_mva = base_mva;
    g.buses = {{"slack", true}, {"load", false}};
    g.lines = {{0, 1, 0.0, x, 0.0, 100.0}};
    grid::Unit load;
    load.name = "l";
    load.bus = 1;
    load.kind = grid::UnitKind::load;
    load.p_max_nom = base_mva;
    g.units = {load};
    return g;
}

/// Closed-form solution of the two-bus case with load P (p.u.) and Q = 0:
/// V1 = cos(d), P = sin(2d) / (2x).
struct TwoBusSolution {
    double vm1;
    double va1;
    double slack_p_pu;
    double slack_q_pu;
};

inline TwoBusSolution two_bus_solution(double x, double p_pu) {
    const double d = 0.5 * std::asin(2.0 * x * p_pu);
    return {std::cos(d), -d, p_pu, std::sin(d) * std::sin(d) / x};
}

/// Largest |S_calc - S_spec| over non-slack buses, recomputed from the admittance matrix.
inline double mismatch_pu(const grid::PowerFlowSolver& solver, const grid::BusInjections& inj,
                          const grid::PowerFlowSolution& sol) {
    const auto& y = solver.admittance();
    const auto n = static_cast<Eigen::Index>(sol.vm_pu.size());
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(sol.vm_pu[i], sol.va_rad[i]);
    const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate());
    const double base = solver.grid().base_mva;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (solver.grid().buses[i].slack) continue;
        worst = std::max(worst, std::abs(s(i).real() - inj.p_mw[i] / base));
        worst = std::max(worst, std::abs(s(i).imag() - inj.q_mvar[i] / base));
    }
    return worst;
}

/// Total losses from the solved voltages: real part of sum V conj(Y V).
inline double losses_pu(const grid::PowerFlowSolver& solver, const grid::PowerFlowSolution& sol) {
    const auto& y = solver.admittance();
    const auto n = static_cast<Eigen::Index>(sol.vm_pu.size());
    Eigen::VectorXcd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = std::polar(sol.vm_pu[i], sol.va_rad[i]);
    return v.cwiseProduct((y * v).conjugate()).sum().real();
}

/// Small dataset and splits for fast environment tests.
inline std::shared_ptr<const env::EnvData> small_env_data(opf::BenchmarkKind kind, std::size_t length = 400,
                                                          std::size_t train = 80, std::size_t validation = 20,
                                                          opf::ScaleConfig scale = {}) {
    auto problem = opf::make_benchmark(kind, scale);
    auto dataset = data::generate_timeseries(problem.timeseries_config(length), 7);
    data::SplitSpec spec;
    spec.train_size = train;
    spec.validation_size = validation;
    auto splits = data::nested_split(dataset, spec);
    return env::make_env_data(std::move(problem), std::move(dataset), std::move(splits));
}

/// One-step contextual bandit: observation s ~ U[0,1]^2, optimal action
/// a* = (0.2 + 0.6 s0, 0.8 - 0.5 s1), reward -|a - a*|^2.
class BanditEnv : public rl::Environment {
public:
    static std::vector<double> optimal(std::span<const double> s) { return {0.2 + 0.6 * s[0], 0.8 - 0.5 * s[1]}; }

    [[nodiscard]] std::size_t observation_dim() const override { return 2; }
    [[nodiscard]] std::size_t action_dim() const override { return 2; }
    void seed(std::uint64_t seed) override { rng_.seed(seed); }
    std::vector<double> reset() override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        obs_ = {u(rng_), u(rng_)};
        return obs_;
    }
    rl::Transition step(std::span<const double> action) override {
        const auto a = optimal(obs_);
        double r = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) r -= (action[i] - a[i]) * (action[i] - a[i]);
        return {obs_, r, true};
    }

private:
    std::mt19937_64 rng_;
    std::vector<double> obs_;
};

}  // namespace autoenv::testing

namespace autoenv::testing {

struct Enumeration {
    double best = 0.0;
    bool any_valid = false;
};

/// Best valid objective over an n x n grid of the 2-D dynamic action box.
inline Enumeration enumerate_2d(const opf::OpfProblem& problem, const opf::GridState& state, int n) {
    const auto box = opf::dynamic_box(problem, state);
    Enumeration e;
    std::vector<double> sp(2);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            sp[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (n - 1);
            sp[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * k / (n - 1);
            const auto sim = opf::simulate(problem, state, sp);
            if (!sim.report.valid) continue;
            if (!e.any_valid || sim.objective < e.best) e.best = sim.objective;
            e.any_valid = true;
        }
    }
    return e;
}

/// Random state of a problem from uniform scalers.
inline opf::GridState random_state(const opf::OpfProblem& problem, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> scal(problem.grid().units.size());
    for (auto& s : scal) s = u(rng);
    std::vector<double> prices(problem.price_channels());
    for (auto& p : prices) p = u(rng);
    return opf::make_state(problem, scal, prices);
}

}  // namespace autoenv::testing

#include "autoenv/mlp.hpp"

namespace autoenv::testing {

struct GradCheck {
    double worst_relative = 0.0;
    std::size_t checked = 0;
    std::size_t kinks = 0;  // skipped: a ReLU switched inside the stencil
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Central-difference check of backward() for loss = sum(c .* net(x)) on
/// every parameter (stride 1) or every stride-th one, plus every input.
/// The differences are taken in long double so that roundoff stays far below
/// the tolerance even for gradients near 1e-7.
inline GradCheck gradient_check(rl::Mlp<double> net, std::size_t batch, std::uint64_t seed, std::size_t stride = 1,
                                long double h = 1e-6L) {
    using Mat = rl::Mlp<double>::Mat;
    using Wide = rl::Mlp<long double>;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    Mat x(static_cast<Eigen::Index>(net.input_size()), static_cast<Eigen::Index>(batch));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
    Mat c(static_cast<Eigen::Index>(net.output_size()), static_cast<Eigen::Index>(batch));
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n01(rng);
    const Wide::Mat cw = c.cast<long double>();
    const Wide::Mat xw = x.cast<long double>();
    auto loss = [&](const Wide& m, const Wide::Mat& in) { return (m.forward(in).array() * cw.array()).sum(); };

    rl::Mlp<double>::Cache cache;
    net.forward(x, cache);
    rl::Mlp<double>::Grads g;
    const Mat gx = net.backward(cache, c, g);
    const auto analytic = rl::Mlp<double>::flatten(g);
    Wide probe = net.cast<long double>();
    const long double f0 = loss(probe, xw);

    GradCheck out;
    auto judge = [&](double a, long double fp, long double fm) {
        const auto central = static_cast<double>((fp - fm) / (2 * h));
        const auto right = static_cast<double>((fp - f0) / h);
        const auto left = static_cast<double>((f0 - fm) / h);
        const double scale = std::max({1e-6, std::abs(a), std::abs(central)});
        if (std::abs(right - left) > 1e-3 * scale + 1e-6) {
            ++out.kinks;
            return;
        }
        ++out.checked;
        const double rel = std::abs(a - central) / scale;
        if (rel > out.worst_relative) {
            out.worst_relative = rel;
            out.worst_analytic = a;
            out.worst_numeric = central;
        }
    };
    auto perturb = [&](long double& slot, double a) {
        const long double keep = slot;
        slot = keep + h;
        const long double fp = loss(probe, xw);
        slot = keep - h;
        const long double fm = loss(probe, xw);
        slot = keep;
        judge(a, fp, fm);
    };
    std::size_t k = 0;
    for (std::size_t l = 0; l < probe.w.size(); ++l) {
        for (Eigen::Index i = 0; i < probe.w[l].size(); ++i, ++k) {
            if (k % stride == 0) perturb(probe.w[l].data()[i], analytic[k]);
        }
        for (Eigen::Index i = 0; i < probe.b[l].size(); ++i, ++k) {
            if (k % stride == 0) perturb(probe.b[l].data()[i], analytic[k]);
        }
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Wide::Mat xp = xw;
        Wide::Mat xm = xw;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        judge(gx.data()[i], loss(probe, xp), loss(probe, xm));
    }
    return out;
}

}  // namespace autoenv::testing

#include "autoenv/metrics.hpp"

namespace autoenv::testing {

/// n states; agent valid on the first n_valid, baseline on the first n_base,
/// objectives J = base_j + gap on every state.
inline std::vector<metrics::StateRecord> records(std::size_t n, std::size_t n_valid, std::size_t n_base,
                                                 double base_j, double gap) {
    std::vector<metrics::StateRecord> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].index = i;
        out[i].valid = i < n_valid;
        out[i].baseline_valid = i < n_base;
        out[i].baseline_objective = base_j + static_cast<double>(i);
        out[i].objective = out[i].baseline_objective + gap;
    }
    return out;
}

}  // namespace autoenv::testing

#include <array>

namespace autoenv::testing {

/// Front ranks by repeatedly peeling the points no remaining point dominates.
inline std::vector<int> brute_force_ranks(const std::vector<std::array<double, 2>>& pts) {
    auto dom = [](const std::array<double, 2>& p, const std::array<double, 2>& q) {
        return p[0] <= q[0] && p[1] <= q[1] && (p[0] < q[0] || p[1] < q[1]);
    };
    std::vector<int> rank(pts.size(), -1);
    std::size_t left = pts.size();
    for (int r = 0; left > 0; ++r) {
        std::vector<std::size_t> peel;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (rank[i] >= 0) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
                dominated = rank[j] < 0 && j != i && dom(pts[j], pts[i]);
            }
            if (!dominated) peel.push_back(i);
        }
        for (auto i : peel) rank[i] = r;
        left -= peel.size();
    }
    return rank;
}

/// Random point set with many ties (values on a coarse grid half the time).
inline std::vector<std::array<double, 2>> random_points(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> grid(0, 5);
    const bool coarse = u(rng) < 0.5;
    std::vector<std::array<double, 2>> pts(n);
    for (auto& p : pts) p = coarse ? std::array<double, 2>{grid(rng) / 5.0, grid(rng) / 5.0} : std::array{u(rng), u(rng)};
    return pts;
}

}  // namespace autoenv::testing

#include "autoenv/hpo.hpp"

namespace autoenv::testing {

/// Random designs whose invalid share depends only on penalty_weight and
/// whose mean error depends only on diff_objective; everything else is noise.
inline std::vector<hpo::TrialRecord> planted_study(std::size_t n, std::uint64_t seed) {
    const auto space = env::DesignSpace::standard();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<hpo::TrialRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        hpo::TrialRecord t;
        t.id = i;
        t.design = space.sample(rng);
        t.status = hpo::TrialStatus::complete;
        t.metrics.invalid_share = t.design.penalty_weight + noise(rng);
        t.metrics.mean_error = 1.0 - 0.5 * (t.design.diff_objective ? 1.0 : 0.0) + noise(rng);
        out.push_back(t);
    }
    return out;
}

}  // namespace autoenv::testing

#include <filesystem>

#include "autoenv/study.hpp"

namespace autoenv::testing {

/// A study that trains in well under a second per trial.
inline hpo::StudyConfig tiny_config(std::size_t trials = 4) {
    hpo::StudyConfig c;
    c.benchmark = opf::BenchmarkKind::voltage_control;
    c.scale = {6, 2, false};
    c.trials = trials;
    c.seeds = 1;
    c.steps = 200;
    c.seed = 3;
    c.dataset_length = 200;
    c.split.train_size = 40;
    c.split.validation_size = 8;
    c.calibration_samples = 100;
    c.ddpg.start_train = 100;
    c.ddpg.batch_size = 16;
    c.ddpg.hidden = {8, 8};
    c.sampler.generation_size = 2;
    c.baseline.starts = 2;
    return c;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("autoenv_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

/// Trial JSON without timing, for run-to-run comparisons.
inline nlohmann::json without_time(const hpo::TrialRecord& t) {
    auto j = hpo::to_json(t);
    j.erase("wall_seconds");
    return j;
}

}  // namespace autoenv::testing

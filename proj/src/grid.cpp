#include "autoenv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "autoenv/errors.hpp"

namespace autoenv::grid {

namespace {

using cd = std::complex<double>;

cd series_admittance(double r, double x) {
    if (r == 0.0 && x == 0.0) {
        throw ConfigError("branch with zero impedance");
    }
    return 1.0 / cd(r, x);
}

bool finite_all(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

int Grid::slack_bus() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].slack) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

void validate(const Grid& grid) {
    const int n = static_cast<int>(grid.buses.size());
    if (n == 0) {
        throw ConfigError("grid has no buses");
    }
    if (!(grid.base_mva > 0.0) || !std::isfinite(grid.base_mva)) {
        throw ConfigError("base_mva must be positive");
    }
    const auto slack_count = std::count_if(grid.buses.begin(), grid.buses.end(), [](const Bus& b) { return b.slack; });
    if (slack_count != 1) {
        throw ConfigError("grid must have exactly one slack bus, found " + std::to_string(slack_count));
    }
    auto check_bus = [n](int b, const std::string& what) {
        if (b < 0 || b >= n) {
            throw ConfigError(what + " references unknown bus " + std::to_string(b));
        }
    };
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
        const auto& l = grid.lines[i];
        check_bus(l.from, "line " + std::to_string(i));
        check_bus(l.to, "line " + std::to_string(i));
        if (l.from == l.to) {
            throw ConfigError("line " + std::to_string(i) + " is a self-loop");
        }
        if (!(l.s_max_mva > 0.0)) {
            throw ConfigError("line " + std::to_string(i) + " needs a positive rating");
        }
        series_admittance(l.r, l.x);
        adj[static_cast<std::size_t>(l.from)].push_back(l.to);
        adj[static_cast<std::size_t>(l.to)].push_back(l.from);
    }
    for (std::size_t i = 0; i < grid.transformers.size(); ++i) {
        const auto& t = grid.transformers[i];
        check_bus(t.hv_bus, "transformer " + std::to_string(i));
        check_bus(t.lv_bus, "transformer " + std::to_string(i));
        if (t.hv_bus == t.lv_bus) {
            throw ConfigError("transformer " + std::to_string(i) + " is a self-loop");
        }
        if (!(t.s_max_mva > 0.0) || !(t.tap > 0.0)) {
            throw ConfigError("transformer " + std::to_string(i) + " needs positive rating and tap");
        }
        series_admittance(t.r, t.x);
        adj[static_cast<std::size_t>(t.hv_bus)].push_back(t.lv_bus);
        adj[static_cast<std::size_t>(t.lv_bus)].push_back(t.hv_bus);
    }
    for (std::size_t i = 0; i < grid.units.size(); ++i) {
        const auto& u = grid.units[i];
        check_bus(u.bus, "unit " + std::to_string(i));
        if (u.p_min_nom > u.p_max_nom || u.q_min_nom > u.q_max_nom) {
            throw ConfigError("unit " + std::to_string(i) + " has an inverted nominal range");
        }
    }

    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::queue<int> queue;
    queue.push(0);
    seen[0] = 1;
    int visited = 1;
    while (!queue.empty()) {
        const int b = queue.front();
        queue.pop();
        for (int nb : adj[static_cast<std::size_t>(b)]) {
            if (!seen[static_cast<std::size_t>(nb)]) {
                seen[static_cast<std::size_t>(nb)] = 1;
                ++visited;
                queue.push(nb);
            }
        }
    }
    if (visited != n) {
        throw ConfigError("grid is not connected");
    }
}

Eigen::MatrixXcd build_admittance(const Grid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& l : grid.lines) {
        const cd ys = series_admittance(l.r, l.x);
        const cd ysh(0.0, l.b / 2.0);
        y(l.from, l.from) += ys + ysh;
        y(l.to, l.to) += ys + ysh;
        y(l.from, l.to) -= ys;
        y(l.to, l.from) -= ys;
    }
    for (const auto& t : grid.transformers) {
        const cd ys = series_admittance(t.r, t.x);
        y(t.hv_bus, t.hv_bus) += ys / (t.tap * t.tap);
        y(t.lv_bus, t.lv_bus) += ys;
        y(t.hv_bus, t.lv_bus) -= ys / t.tap;
        y(t.lv_bus, t.hv_bus) -= ys / t.tap;
    }
    return y;
}

PowerFlowSolver::PowerFlowSolver(Grid grid, PowerFlowOptions options)
    : grid_(std::move(grid)), options_(options) {
    validate(grid_);
    ybus_ = build_admittance(grid_);
    slack_ = grid_.slack_bus();
    for (int i = 0; i < static_cast<int>(grid_.buses.size()); ++i) {
        if (i != slack_) {
            pq_buses_.push_back(i);
        }
    }
}

PowerFlowSolution PowerFlowSolver::solve(const BusInjections& injections) const {
    const auto n = static_cast<Eigen::Index>(grid_.buses.size());
    if (injections.p_mw.size() != static_cast<std::size_t>(n) || injections.q_mvar.size() != static_cast<std::size_t>(n)) {
        throw ConfigError("injection vector size does not match bus count");
    }
    const double base = grid_.base_mva;
    Eigen::VectorXcd s_spec(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = injections.p_mw[static_cast<std::size_t>(i)];
        const double q = injections.q_mvar[static_cast<std::size_t>(i)];
        if (!std::isfinite(p) || !std::isfinite(q)) {
            throw ConfigError("non-finite bus injection");
        }
        s_spec(i) = cd(p / base, q / base);
    }

    const auto m = static_cast<Eigen::Index>(pq_buses_.size());
    Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd va = Eigen::VectorXd::Zero(n);

    PowerFlowSolution sol;
    Eigen::VectorXcd v(n);
    Eigen::VectorXcd current(n);
    Eigen::VectorXd mismatch(2 * m);
    Eigen::MatrixXd jac(2 * m, 2 * m);

    auto evaluate = [&]() {
        for (Eigen::Index i = 0; i < n; ++i) {
            v(i) = std::polar(vm(i), va(i));
        }
        current = ybus_ * v;
        for (Eigen::Index k = 0; k < m; ++k) {
            const int b = pq_buses_[static_cast<std::size_t>(k)];
            const cd s = v(b) * std::conj(current(b)) - s_spec(b);
            mismatch(k) = s.real();
            mismatch(m + k) = s.imag();
        }
        return m == 0 ? 0.0 : mismatch.cwiseAbs().maxCoeff();
    };

    double worst = evaluate();
    int iter = 0;
    bool ok = std::isfinite(worst);
    while (ok && worst > options_.tolerance_pu && iter < options_.max_iterations) {
        // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V)),
        // dS/d|V|   = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        for (Eigen::Index r = 0; r < m; ++r) {
            const int i = pq_buses_[static_cast<std::size_t>(r)];
            for (Eigen::Index c = 0; c < m; ++c) {
                const int k = pq_buses_[static_cast<std::size_t>(c)];
                const cd vnorm_k = v(k) / vm(k);
                cd ds_dva = cd(0.0, 1.0) * v(i) * std::conj(-ybus_(i, k) * v(k));
                cd ds_dvm = v(i) * std::conj(ybus_(i, k) * vnorm_k);
                if (i == k) {
                    ds_dva += cd(0.0, 1.0) * v(i) * std::conj(current(i));
                    ds_dvm += std::conj(current(i)) * vnorm_k;
                }
                jac(r, c) = ds_dva.real();
                jac(r, m + c) = ds_dvm.real();
                jac(m + r, c) = ds_dva.imag();
                jac(m + r, m + c) = ds_dvm.imag();
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        if (!(lu.rcond() > 1e-14)) {
            ok = false;
            break;
        }
        const Eigen::VectorXd dx = lu.solve(mismatch);
        if (!finite_all(dx)) {
            ok = false;
            break;
        }
        for (Eigen::Index k = 0; k < m; ++k) {
            const int b = pq_buses_[static_cast<std::size_t>(k)];
            va(b) -= dx(k);
            vm(b) -= dx(m + k);
        }
        ++iter;
        worst = evaluate();
        ok = std::isfinite(worst) && vm.minCoeff() > 0.0;
    }

    sol.iterations = iter;
    sol.max_mismatch_pu = worst;
    sol.converged = ok && worst <= options_.tolerance_pu;
    sol.vm_pu.assign(vm.data(), vm.data() + n);
    sol.va_rad.assign(va.data(), va.data() + n);
    sol.line_loading.assign(grid_.lines.size(), 0.0);
    sol.trafo_loading.assign(grid_.transformers.size(), 0.0);
    if (!sol.converged) {
        return sol;
    }

    for (std::size_t i = 0; i < grid_.lines.size(); ++i) {
        const auto& l = grid_.lines[i];
        const cd ys = series_admittance(l.r, l.x);
        const cd ysh(0.0, l.b / 2.0);
        const cd i_ft = (v(l.from) - v(l.to)) * ys + v(l.from) * ysh;
        const cd i_tf = (v(l.to) - v(l.from)) * ys + v(l.to) * ysh;
        const double s_from = std::abs(v(l.from) * std::conj(i_ft));
        const double s_to = std::abs(v(l.to) * std::conj(i_tf));
        sol.line_loading[i] = std::max(s_from, s_to) * base / l.s_max_mva;
    }
    for (std::size_t i = 0; i < grid_.transformers.size(); ++i) {
        const auto& t = grid_.transformers[i];
        const cd ys = series_admittance(t.r, t.x);
        const cd i_hv = (v(t.hv_bus) / (t.tap * t.tap) - v(t.lv_bus) / t.tap) * ys;
        const cd i_lv = (v(t.lv_bus) - v(t.hv_bus) / t.tap) * ys;
        const double s_hv = std::abs(v(t.hv_bus) * std::conj(i_hv));
        const double s_lv = std::abs(v(t.lv_bus) * std::conj(i_lv));
        sol.trafo_loading[i] = std::max(s_hv, s_lv) * base / t.s_max_mva;
    }

    const cd s_slack = v(slack_) * std::conj(current(slack_));
    sol.slack_p_mw = s_slack.real() * base;
    sol.slack_q_mvar = s_slack.imag() * base;
    double p_total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        p_total += (v(i) * std::conj(current(i))).real();
    }
    sol.p_loss_mw = p_total * base;
    return sol;
}

PowerFlowSolution run_power_flow(const Grid& grid, const BusInjections& injections, PowerFlowOptions options) {
    return PowerFlowSolver(grid, options).solve(injections);
}

// ---------------------------------------------------------------------------

ConstraintReport evaluate_constraints(const Grid& grid, const PowerFlowSolution& solution,
                                      const ConstraintLimits& limits) {
    ConstraintReport report;
    report.converged = solution.converged;
    report.voltage.assign(grid.buses.size(), 0.0);
    report.line.assign(grid.lines.size(), 0.0);
    report.trafo.assign(grid.transformers.size(), 0.0);
    if (!solution.converged) {
        // Sentinel: every constraint counts as violated by its full range.
        std::fill(report.voltage.begin(), report.voltage.end(), limits.v_max - limits.v_min);
        report.valid = false;
        return report;
    }

    const double tol_mva = kViolationTolerancePu * grid.base_mva;
    auto snap = [](double value, double tol) { return value <= tol ? 0.0 : value; };

    bool valid = true;
    for (std::size_t b = 0; b < grid.buses.size(); ++b) {
        const double vm = solution.vm_pu[b];
        const double viol = std::max(0.0, vm - limits.v_max) + std::max(0.0, limits.v_min - vm);
        report.voltage[b] = snap(viol, kViolationTolerancePu);
        valid = valid && report.voltage[b] == 0.0;
    }
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
        const double s_max = grid.lines[i].s_max_mva;
        const double viol = std::max(0.0, (solution.line_loading[i] - limits.max_line_loading) * s_max);
        report.line[i] = snap(viol, tol_mva);
        valid = valid && report.line[i] == 0.0;
    }
    for (std::size_t i = 0; i < grid.transformers.size(); ++i) {
        const double s_max = grid.transformers[i].s_max_mva;
        const double viol = std::max(0.0, (solution.trafo_loading[i] - limits.max_trafo_loading) * s_max);
        report.trafo[i] = snap(viol, tol_mva);
        valid = valid && report.trafo[i] == 0.0;
    }
    report.slack_p = snap(std::max(0.0, solution.slack_p_mw - limits.slack_p_max_mw) +
                              std::max(0.0, limits.slack_p_min_mw - solution.slack_p_mw),
                          tol_mva);
    report.slack_q = snap(std::max(0.0, solution.slack_q_mvar - limits.slack_q_max_mvar) +
                              std::max(0.0, limits.slack_q_min_mvar - solution.slack_q_mvar),
                          tol_mva);
    valid = valid && report.slack_p == 0.0 && report.slack_q == 0.0;
    report.valid = valid;
    return report;
}

PenaltyScaling PenaltyScaling::from_limits(const Grid& grid, const ConstraintLimits& limits) {
    // Unbounded ranges fall back to the grid base.
    auto width = [&](double lo, double hi) {
        const double w = hi - lo;
        return (w > 0.0 && w < 1e6) ? w : grid.base_mva;
    };
    PenaltyScaling s;
    s.voltage = limits.v_max > limits.v_min ? limits.v_max - limits.v_min : 1.0;
    for (const auto& l : grid.lines) {
        s.line.push_back(l.s_max_mva);
    }
    for (const auto& t : grid.transformers) {
        s.trafo.push_back(t.s_max_mva);
    }
    s.slack_p = width(limits.slack_p_min_mw, limits.slack_p_max_mw);
    s.slack_q = width(limits.slack_q_min_mvar, limits.slack_q_max_mvar);
    return s;
}

double penalty(const ConstraintReport& report, const PenaltyScaling& scaling) {
    if (!report.converged) {
        return kDivergedPenalty;
    }
    double p = 0.0;
    for (double v : report.voltage) {
        p += v / scaling.voltage;
    }
    for (std::size_t i = 0; i < report.line.size(); ++i) {
        p += report.line[i] / scaling.line.at(i);
    }
    for (std::size_t i = 0; i < report.trafo.size(); ++i) {
        p += report.trafo[i] / scaling.trafo.at(i);
    }
    p += report.slack_p / scaling.slack_p;
    p += report.slack_q / scaling.slack_q;
    return p;
}

}  // namespace autoenv::grid

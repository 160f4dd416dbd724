#include "autoenv/opf.hpp"

#include <algorithm>
#include <cmath>

#include "autoenv/errors.hpp"
#include "autoenv/grid_io.hpp"
#include "autoenv/hash.hpp"

namespace autoenv::opf {

using grid::Unit;
using grid::UnitKind;

const char* to_string(BenchmarkKind kind) {
    switch (kind) {
    case BenchmarkKind::voltage_control: return "voltage-control";
    case BenchmarkKind::load_shedding: return "load-shedding";
    case BenchmarkKind::economic_dispatch: return "economic-dispatch";
    case BenchmarkKind::q_market: return "q-market";
    case BenchmarkKind::max_renewables: return "max-renewables";
    }
    return "unknown";
}

BenchmarkKind benchmark_from_string(const std::string& s) {
    std::string norm = s;
    std::replace(norm.begin(), norm.end(), '_', '-');
    for (auto k : kAllBenchmarks) {
        if (norm == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown benchmark kind '" + s + "'");
}

std::size_t OpfProblem::price_channels() const {
    return static_cast<std::size_t>(
        std::count_if(actuators.begin(), actuators.end(), [](const Actuator& a) { return a.priced(); }));
}

bool OpfProblem::is_controllable_unit(std::size_t unit) const {
    return grid().units.at(unit).controllable;
}

data::TimeseriesConfig OpfProblem::timeseries_config(std::size_t length) const {
    data::TimeseriesConfig c;
    c.length = length;
    c.unit_archetypes = unit_archetypes;
    c.price_channels = price_channels();
    return c;
}

std::uint64_t OpfProblem::hash() const {
    Fnv1a h;
    h.add(to_string(kind));
    h.add(grid::to_json(grid::GridDefinition{grid(), limits}).dump());
    for (const auto& a : actuators) {
        h.add(static_cast<std::uint64_t>(a.unit));
        h.add(static_cast<std::uint64_t>(a.axis));
        h.add(a.price_min);
        h.add(a.price_max);
    }
    h.add(loss_price);
    h.add(load_tan_phi);
    h.add(rating_factor);
    return h.value();
}

std::uint64_t GridState::hash() const {
    Fnv1a h;
    for (const auto* v : {&p, &q, &p_min, &p_max, &q_min, &q_max, &prices}) {
        h.add(static_cast<std::uint64_t>(v->size()));
        h.add(std::span<const double>(*v));
    }
    return h.value();
}

// ---------------------------------------------------------------------------
// Benchmark construction

namespace {

struct FeederParams {
    double line_r = 0.02;
    double line_x = 0.03;
    double line_mva = 8.0;
    double trafo_mva = 15.0;
    double load_mw = 1.0;
};

/// Buses 0 (slack, HV) and 1 (MV substation), then two radial branches.
/// Returns the grid and the actuator placement order (feeder ends first).
std::pair<grid::Grid, std::vector<int>> build_feeder(const ScaleConfig& scale, const FeederParams& fp) {
    grid::Grid g;
    g.base_mva = 10.0;
    const int n = scale.buses;
    for (int i = 0; i < n; ++i) {
        g.buses.push_back({i == 0 ? "slack" : "bus" + std::to_string(i), i == 0});
    }
    g.transformers.push_back({0, 1, 0.002, 0.04, 1.0, fp.trafo_mva});

    const int feeder = n - 2;
    const int len_a = (feeder + 1) / 2;
    std::vector<int> branch_a;
    std::vector<int> branch_b;
    for (int i = 0; i < feeder; ++i) {
        (i < len_a ? branch_a : branch_b).push_back(2 + i);
    }
    auto chain = [&](const std::vector<int>& br) {
        int prev = 1;
        for (std::size_t i = 0; i < br.size(); ++i) {
            // Ratings taper along the feeder.
            const double rating = fp.line_mva * (i == 0 ? 1.0 : 0.75);
            g.lines.push_back({prev, br[i], fp.line_r, fp.line_x, 0.0, rating});
            prev = br[i];
        }
    };
    chain(branch_a);
    chain(branch_b);
    if (scale.meshed && !branch_a.empty() && !branch_b.empty()) {
        g.lines.push_back({branch_a.back(), branch_b.back(), 2.0 * fp.line_r, 2.0 * fp.line_x, 0.0, 0.5 * fp.line_mva});
    }

    std::vector<int> order;
    for (std::size_t i = 0; i < std::max(branch_a.size(), branch_b.size()); ++i) {
        if (i < branch_a.size()) order.push_back(branch_a[branch_a.size() - 1 - i]);
        if (i < branch_b.size()) order.push_back(branch_b[branch_b.size() - 1 - i]);
    }
    return {g, order};
}

void add_loads(OpfProblem& prob, grid::Grid& g, double load_mw) {
    for (int b = 2; b < static_cast<int>(g.buses.size()); ++b) {
        // Slight heterogeneity so buses are distinguishable.
        const double scale = 1.0 + 0.1 * static_cast<double>((b * 7) % 5 - 2);
        Unit u;
        u.name = "load" + std::to_string(b);
        u.bus = b;
        u.kind = UnitKind::load;
        u.p_min_nom = 0.0;
        u.p_max_nom = load_mw * scale;
        u.q_min_nom = 0.0;
        u.q_max_nom = prob.load_tan_phi * u.p_max_nom;
        g.units.push_back(u);
        prob.unit_archetypes.push_back(data::Archetype::load);
    }
}

int add_renewable(OpfProblem& prob, grid::Grid& g, int bus, double p_mw, double q_share, bool controllable,
                  data::Archetype archetype) {
    Unit u;
    u.name = std::string(archetype == data::Archetype::solar ? "pv" : "wind") + std::to_string(bus);
    u.bus = bus;
    u.kind = UnitKind::generator;
    u.renewable = true;
    u.controllable = controllable;
    u.p_min_nom = 0.0;
    u.p_max_nom = p_mw;
    u.q_min_nom = -q_share * p_mw;
    u.q_max_nom = q_share * p_mw;
    g.units.push_back(u);
    prob.unit_archetypes.push_back(archetype);
    return static_cast<int>(g.units.size()) - 1;
}

int add_storage(OpfProblem& prob, grid::Grid& g, int bus, double p_mw, double q_mvar) {
    Unit u;
    u.name = "storage" + std::to_string(bus);
    u.bus = bus;
    u.kind = UnitKind::storage;
    u.controllable = true;
    u.p_min_nom = -p_mw;
    u.p_max_nom = p_mw;
    u.q_min_nom = -q_mvar;
    u.q_max_nom = q_mvar;
    g.units.push_back(u);
    prob.unit_archetypes.push_back(data::Archetype::wind);  // state-of-charge proxy
    return static_cast<int>(g.units.size()) - 1;
}

data::Archetype alternate(int i) { return i % 2 == 0 ? data::Archetype::solar : data::Archetype::wind; }

}  // namespace

OpfProblem make_benchmark(BenchmarkKind kind, const ScaleConfig& scale) {
    if (scale.buses < 6 || scale.buses > 14) {
        throw ConfigError("benchmark bus count must lie in [6, 14]");
    }
    if (scale.actuators < 2 || scale.actuators > 6 || scale.actuators > scale.buses - 2) {
        throw ConfigError("benchmark actuator count must lie in [2, 6] and fit the feeder");
    }
    OpfProblem prob;
    prob.kind = kind;
    prob.scale = scale;
    const int k = scale.actuators;

    FeederParams fp;
    grid::ConstraintLimits lim;
    switch (kind) {
    case BenchmarkKind::voltage_control:
    case BenchmarkKind::q_market:
        fp.load_mw = 1.6;
        fp.line_mva = 12.0;
        fp.line_r = 0.05;
        fp.line_x = 0.06;
        break;
    case BenchmarkKind::load_shedding:
        fp.load_mw = 1.5;
        fp.line_mva = 6.0;
        break;
    case BenchmarkKind::economic_dispatch:
        fp.load_mw = 1.4;
        fp.line_mva = 7.0;
        break;
    case BenchmarkKind::max_renewables:
        fp.load_mw = 0.5;
        fp.line_mva = 5.0;
        fp.line_r = 0.03;
        fp.line_x = 0.04;
        fp.trafo_mva = 7.0;
        break;
    }
    auto [g, order] = build_feeder(scale, fp);
    add_loads(prob, g, fp.load_mw);
    const double total_peak = [&] {
        double s = 0.0;
        for (const auto& u : g.units) s += u.p_max_nom;
        return s;
    }();

    auto bus_at = [&order](int i) { return order[static_cast<std::size_t>(i) % order.size()]; };

    switch (kind) {
    case BenchmarkKind::voltage_control:
    case BenchmarkKind::q_market: {
        const bool market = kind == BenchmarkKind::q_market;
        const int storages = (!market && k >= 4) ? 1 : 0;
        for (int i = 0; i < k - storages; ++i) {
            const int u = add_renewable(prob, g, bus_at(i), 2.0, 0.5, true, alternate(i));
            Actuator a{u, Axis::q};
            if (market) {
                a.price_min = 0.0;
                a.price_max = 5.0;
            }
            prob.actuators.push_back(a);
        }
        for (int i = 0; i < storages; ++i) {
            const int u = add_storage(prob, g, bus_at(k - 1), 1.0, 0.6);
            prob.actuators.push_back({u, Axis::q});
        }
        lim.slack_q_min_mvar = market ? -1.6 : -2.5;
        lim.slack_q_max_mvar = market ? 1.6 : 2.5;
        if (market) {
            prob.loss_price = 50.0;
        }
        break;
    }
    case BenchmarkKind::load_shedding: {
        const int storages = k >= 3 ? 1 : 0;
        const int sheds = k - storages;
        // Controllable loads: the ones at the feeder ends.
        for (int i = 0; i < sheds; ++i) {
            const int bus = bus_at(i);
            for (std::size_t u = 0; u < g.units.size(); ++u) {
                if (g.units[u].kind == UnitKind::load && g.units[u].bus == bus) {
                    g.units[u].controllable = true;
                    prob.actuators.push_back({static_cast<int>(u), Axis::p, 1.0, 10.0});
                }
            }
        }
        for (int i = 0; i < storages; ++i) {
            const int u = add_storage(prob, g, bus_at(sheds), 1.0, 0.0);
            prob.actuators.push_back({u, Axis::p, 0.5, 2.0});
        }
        // Uncontrolled PV relieves the import limit during the day.
        add_renewable(prob, g, bus_at(sheds + storages), 1.5, 0.0, false, data::Archetype::solar);
        lim.slack_p_max_mw = 0.7 * total_peak;
        lim.slack_p_min_mw = -1e9;
        break;
    }
    case BenchmarkKind::economic_dispatch: {
        for (int i = 0; i < k; ++i) {
            const int u = add_renewable(prob, g, bus_at(i), 3.0, 0.0, true, alternate(i + 1));
            // Spread price bands so that the merit order changes between states.
            prob.actuators.push_back({u, Axis::p, 20.0 + 5.0 * i, 50.0 + 5.0 * i});
        }
        lim.slack_p_max_mw = total_peak - 0.3 * 3.0 * k;
        lim.slack_p_min_mw = -1e9;
        break;
    }
    case BenchmarkKind::max_renewables: {
        const int storages = k >= 3 ? 1 : 0;
        const double unit_mw = 12.0 / (k - storages);
        for (int i = 0; i < k - storages; ++i) {
            const int u = add_renewable(prob, g, bus_at(i), unit_mw, 0.0, true, alternate(i));
            prob.actuators.push_back({u, Axis::p});
        }
        for (int i = 0; i < storages; ++i) {
            const int u = add_storage(prob, g, bus_at(k - 1), 1.5, 0.0);
            prob.actuators.push_back({u, Axis::p});
        }
        break;
    }
    }
    for (const auto& a : prob.actuators) {
        g.units[static_cast<std::size_t>(a.unit)].controllable = true;
    }
    prob.limits = lim;
    prob.scaling = grid::PenaltyScaling::from_limits(g, lim);
    prob.solver = std::make_shared<const grid::PowerFlowSolver>(std::move(g));
    return prob;
}

nlohmann::json benchmark_config_to_json(BenchmarkKind kind, const ScaleConfig& scale) {
    return {{"kind", to_string(kind)}, {"buses", scale.buses}, {"actuators", scale.actuators}, {"meshed", scale.meshed}};
}

OpfProblem benchmark_from_json(const nlohmann::json& doc) {
    try {
        ScaleConfig scale;
        scale.buses = doc.value("buses", scale.buses);
        scale.actuators = doc.value("actuators", scale.actuators);
        scale.meshed = doc.value("meshed", scale.meshed);
        return make_benchmark(benchmark_from_string(doc.at("kind").get<std::string>()), scale);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed benchmark config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// States and simulation

GridState make_state(const OpfProblem& problem, std::span<const double> unit_scalers,
                     std::span<const double> price_scalers) {
    const auto& units = problem.grid().units;
    const std::size_t n = units.size();
    if (unit_scalers.size() != n) {
        throw ConfigError("unit scaler count does not match the grid");
    }
    if (price_scalers.size() != problem.price_channels()) {
        throw ConfigError("price scaler count does not match the problem");
    }
    GridState s;
    s.p.resize(n);
    s.q.resize(n);
    s.p_min.resize(n);
    s.p_max.resize(n);
    s.q_min.resize(n);
    s.q_max.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Unit& u = units[i];
        const double x = std::clamp(unit_scalers[i], 0.0, 1.0);
        switch (u.kind) {
        case UnitKind::load: {
            s.p[i] = x * u.p_max_nom;
            s.q[i] = problem.load_tan_phi * s.p[i];
            // Shed range.
            s.p_min[i] = 0.0;
            s.p_max[i] = s.p[i];
            s.q_min[i] = 0.0;
            s.q_max[i] = s.q[i];
            break;
        }
        case UnitKind::generator: {
            const double avail = u.p_min_nom + x * (u.p_max_nom - u.p_min_nom);
            s.p[i] = avail;
            s.q[i] = 0.0;
            s.p_min[i] = u.p_min_nom;
            s.p_max[i] = avail;
            const double rating = problem.rating_factor * std::max(std::abs(u.p_max_nom), std::abs(u.p_min_nom));
            const double qcap = std::sqrt(std::max(0.0, rating * rating - avail * avail));
            s.q_min[i] = std::max(u.q_min_nom, -qcap);
            s.q_max[i] = std::min(u.q_max_nom, qcap);
            s.q[i] = std::clamp(0.0, s.q_min[i], s.q_max[i]);
            break;
        }
        case UnitKind::storage: {
            // x is the state of charge: a full storage cannot charge, an empty one cannot discharge.
            s.p[i] = 0.0;
            s.q[i] = 0.0;
            s.p_min[i] = u.p_min_nom * (1.0 - x);
            s.p_max[i] = u.p_max_nom * x;
            s.q_min[i] = u.q_min_nom;
            s.q_max[i] = u.q_max_nom;
            break;
        }
        }
    }
    s.prices.assign(problem.actuators.size(), 0.0);
    std::size_t ch = 0;
    for (std::size_t a = 0; a < problem.actuators.size(); ++a) {
        const auto& act = problem.actuators[a];
        if (act.priced()) {
            const double x = std::clamp(price_scalers[ch++], 0.0, 1.0);
            s.prices[a] = act.price_min + x * (act.price_max - act.price_min);
        }
    }
    return s;
}

ActionBox dynamic_box(const OpfProblem& problem, const GridState& state) {
    ActionBox box;
    for (const auto& a : problem.actuators) {
        const auto u = static_cast<std::size_t>(a.unit);
        if (a.axis == Axis::p) {
            box.lo.push_back(state.p_min[u]);
            box.hi.push_back(state.p_max[u]);
        } else {
            box.lo.push_back(state.q_min[u]);
            box.hi.push_back(state.q_max[u]);
        }
    }
    return box;
}

ActionBox nominal_box(const OpfProblem& problem) {
    ActionBox box;
    for (const auto& a : problem.actuators) {
        const auto& u = problem.grid().units.at(static_cast<std::size_t>(a.unit));
        if (a.axis == Axis::p) {
            box.lo.push_back(u.kind == UnitKind::load ? 0.0 : u.p_min_nom);
            box.hi.push_back(u.p_max_nom);
        } else {
            box.lo.push_back(u.q_min_nom);
            box.hi.push_back(u.q_max_nom);
        }
    }
    return box;
}

std::vector<double> initial_setpoints(const OpfProblem& problem, const GridState& state) {
    std::vector<double> sp;
    const auto box = dynamic_box(problem, state);
    for (std::size_t i = 0; i < problem.actuators.size(); ++i) {
        const auto& a = problem.actuators[i];
        const auto& unit = problem.grid().units.at(static_cast<std::size_t>(a.unit));
        double v = 0.0;
        if (a.axis == Axis::p && unit.kind == UnitKind::generator) {
            v = state.p[static_cast<std::size_t>(a.unit)];
        }
        sp.push_back(std::clamp(v, box.lo[i], box.hi[i]));
    }
    return sp;
}

grid::BusInjections bus_injections(const OpfProblem& problem, const GridState& state,
                                   std::span<const double> setpoints) {
    const auto& g = problem.grid();
    if (setpoints.size() != problem.actuators.size()) {
        throw ConfigError("setpoint count does not match the action dimension");
    }
    std::vector<double> p = state.p;
    std::vector<double> q = state.q;
    std::vector<double> shed(g.units.size(), 0.0);
    for (std::size_t i = 0; i < problem.actuators.size(); ++i) {
        const auto& a = problem.actuators[i];
        const auto u = static_cast<std::size_t>(a.unit);
        if (g.units[u].kind == UnitKind::load) {
            shed[u] = setpoints[i];
        } else if (a.axis == Axis::p) {
            p[u] = setpoints[i];
        } else {
            q[u] = setpoints[i];
        }
    }
    grid::BusInjections inj(g.bus_count());
    for (std::size_t u = 0; u < g.units.size(); ++u) {
        const auto& unit = g.units[u];
        double pu = p[u];
        double qu = q[u];
        if (unit.kind == UnitKind::load && shed[u] != 0.0) {
            const double remaining = std::max(0.0, p[u] - shed[u]);
            qu = p[u] > 0.0 ? q[u] * remaining / p[u] : 0.0;
            pu = remaining;
        }
        const auto b = static_cast<std::size_t>(unit.bus);
        inj.p_mw[b] += unit.injection_sign() * pu;
        inj.q_mvar[b] += unit.injection_sign() * qu;
    }
    return inj;
}

double objective(const OpfProblem& problem, const GridState& state, const grid::PowerFlowSolution& solution,
                 std::span<const double> setpoints) {
    double j = 0.0;
    switch (problem.kind) {
    case BenchmarkKind::voltage_control:
        j = solution.p_loss_mw;
        break;
    case BenchmarkKind::load_shedding:
        // Storage use is priced in both directions.
        for (std::size_t i = 0; i < setpoints.size(); ++i) {
            j += std::abs(setpoints[i]) * state.prices[i];
        }
        break;
    case BenchmarkKind::economic_dispatch:
        for (std::size_t i = 0; i < setpoints.size(); ++i) {
            j += setpoints[i] * state.prices[i];
        }
        break;
    case BenchmarkKind::q_market:
        j = solution.p_loss_mw * problem.loss_price;
        for (std::size_t i = 0; i < setpoints.size(); ++i) {
            j += std::abs(setpoints[i]) * state.prices[i];
        }
        break;
    case BenchmarkKind::max_renewables:
        for (std::size_t i = 0; i < setpoints.size(); ++i) {
            const auto& unit = problem.grid().units.at(static_cast<std::size_t>(problem.actuators[i].unit));
            if (unit.kind == UnitKind::generator && unit.renewable) {
                j -= setpoints[i];
            }
        }
        break;
    }
    return j;
}

Simulation simulate(const OpfProblem& problem, const GridState& state, std::span<const double> setpoints) {
    Simulation sim;
    sim.flow = problem.solver->solve(bus_injections(problem, state, setpoints));
    sim.report = grid::evaluate_constraints(problem.grid(), sim.flow, problem.limits);
    sim.penalty = grid::penalty(sim.report, problem.scaling);
    sim.objective = sim.flow.converged ? objective(problem, state, sim.flow, setpoints) : 0.0;
    return sim;
}

bool is_valid(const OpfProblem& problem, const GridState& state, std::span<const double> setpoints) {
    return simulate(problem, state, setpoints).report.valid;
}

}  // namespace autoenv::opf

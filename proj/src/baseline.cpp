#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "autoenv/errors.hpp"
#include "autoenv/hash.hpp"
#include "autoenv/opf.hpp"

namespace autoenv::opf {

namespace {

struct Point {
    std::vector<double> x;  // normalized to [0, 1] per axis
    double j = 0.0;
    double p = 0.0;
    bool valid = false;
};

class PenalizedSearch {
public:
    PenalizedSearch(const OpfProblem& problem, const GridState& state)
        : problem_(problem), state_(state), box_(dynamic_box(problem, state)) {
        for (std::size_t i = 0; i < box_.lo.size(); ++i) {
            width_.push_back(box_.hi[i] - box_.lo[i]);
        }
    }

    [[nodiscard]] std::size_t dim() const { return width_.size(); }
    [[nodiscard]] bool free_axis(std::size_t i) const { return width_[i] > 0.0; }
    [[nodiscard]] long evaluations() const { return evaluations_; }

    [[nodiscard]] std::vector<double> setpoints(const std::vector<double>& x) const {
        std::vector<double> u(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            // Hit the bounds exactly at the box faces.
            u[i] = x[i] <= 0.0 ? box_.lo[i] : x[i] >= 1.0 ? box_.hi[i] : box_.lo[i] + x[i] * width_[i];
        }
        return u;
    }

    Point evaluate(std::vector<double> x) {
        ++evaluations_;
        Point pt;
        const auto sim = simulate(problem_, state_, setpoints(x));
        pt.x = std::move(x);
        pt.j = sim.objective;
        pt.p = sim.penalty;
        pt.valid = sim.report.valid;
        return pt;
    }

private:
    const OpfProblem& problem_;
    const GridState& state_;
    ActionBox box_;
    std::vector<double> width_;
    long evaluations_ = 0;
};

double merit(const Point& pt, double rho) { return pt.j + rho * pt.p; }

bool better(const Point& a, const Point& b) {
    if (a.valid != b.valid) {
        return a.valid;
    }
    return a.valid ? a.j < b.j : a.p < b.p;
}

/// One stage of compass search at fixed rho. Returns the final incumbent.
Point pattern_search(PenalizedSearch& search, Point x, double rho, double step, double min_step, Point& best) {
    const std::size_t d = search.dim();
    auto improves = [&](const Point& cand, const Point& cur) {
        const double fc = merit(cur, rho);
        return merit(cand, rho) < fc - 1e-13 * (1.0 + std::abs(fc));
    };
    auto try_move = [&](std::vector<double> y, Point& incumbent, Point& winner, bool& found) {
        for (auto& v : y) v = std::clamp(v, 0.0, 1.0);
        if (y == incumbent.x) {
            return;
        }
        Point cand = search.evaluate(std::move(y));
        if (better(cand, best)) {
            best = cand;
        }
        if (improves(cand, found ? winner : incumbent)) {
            winner = std::move(cand);
            found = true;
        }
    };

    while (step >= min_step) {
        Point winner;
        bool found = false;
        for (std::size_t i = 0; i < d; ++i) {
            if (!search.free_axis(i)) continue;
            for (double sign : {1.0, -1.0}) {
                auto y = x.x;
                y[i] += sign * step;
                try_move(std::move(y), x, winner, found);
            }
        }
        if (!found) {
            // Diagonal polls escape kinks where a constraint is active.
            for (std::size_t i = 0; i < d && !found; ++i) {
                for (std::size_t k = i + 1; k < d; ++k) {
                    if (!search.free_axis(i) || !search.free_axis(k)) continue;
                    for (double si : {1.0, -1.0}) {
                        for (double sk : {1.0, -1.0}) {
                            auto y = x.x;
                            y[i] += si * step;
                            y[k] += sk * step;
                            try_move(std::move(y), x, winner, found);
                        }
                    }
                }
            }
        }
        if (found) {
            x = std::move(winner);
        } else {
            step *= 0.5;
        }
    }
    return x;
}

}  // namespace

BaselineSolution baseline_solve(const OpfProblem& problem, const GridState& state, const BaselineBudget& budget) {
    if (budget.starts < 1 || !(budget.min_step > 0.0) || budget.initial_step < budget.min_step) {
        throw ConfigError("invalid baseline budget");
    }
    PenalizedSearch search(problem, state);
    const std::size_t d = search.dim();
    std::mt19937_64 rng(mix_seed(budget.seed, state.hash()));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<Point> starts;
    for (int s = 0; s < budget.starts; ++s) {
        std::vector<double> x(d);
        for (auto& v : x) v = unif(rng);
        starts.push_back(search.evaluate(std::move(x)));
    }
    double jmin = std::numeric_limits<double>::infinity();
    double jmax = -jmin;
    for (const auto& s : starts) {
        if (s.p < grid::kDivergedPenalty) {
            jmin = std::min(jmin, s.j);
            jmax = std::max(jmax, s.j);
        }
    }
    const double spread = std::isfinite(jmax - jmin) ? std::max(jmax - jmin, 1e-6 * (1.0 + std::abs(jmax))) : 1.0;

    Point best = starts.front();
    for (const auto& s : starts) {
        if (better(s, best)) best = s;
    }
    for (auto& start : starts) {
        Point x = start;
        double rho = spread;
        double step = budget.initial_step;
        for (int stage = 0; stage < budget.penalty_stages; ++stage) {
            x = pattern_search(search, std::move(x), rho, step, budget.min_step, best);
            rho *= 100.0;
            step = std::max(budget.min_step, step * 0.25);
        }
    }

    BaselineSolution sol;
    sol.setpoints = search.setpoints(best.x);
    sol.objective = best.j;
    sol.valid = best.valid;
    sol.status = best.valid ? BaselineStatus::optimal : BaselineStatus::infeasible;
    sol.evaluations = search.evaluations();
    return sol;
}

nlohmann::json to_json(const BaselineSolution& s) {
    return {{"setpoints", s.setpoints},
            {"objective", s.objective},
            {"valid", s.valid},
            {"status", s.status == BaselineStatus::optimal ? "optimal" : "infeasible"},
            {"evaluations", s.evaluations}};
}

BaselineSolution baseline_from_json(const nlohmann::json& doc) {
    BaselineSolution s;
    s.setpoints = doc.at("setpoints").get<std::vector<double>>();
    s.objective = doc.at("objective").get<double>();
    s.valid = doc.at("valid").get<bool>();
    s.status = doc.value("status", std::string("infeasible")) == "optimal" ? BaselineStatus::optimal
                                                                              : BaselineStatus::infeasible;
    s.evaluations = doc.value("evaluations", 0L);
    return s;
}

// ---------------------------------------------------------------------------

BaselineCache::BaselineCache(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_);
    if (!in) {
        return;
    }
    nlohmann::json doc;
    try {
        in >> doc;
        for (const auto& [k, v] : doc.at("entries").items()) {
            entries_.emplace(k, baseline_from_json(v));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("corrupt baseline cache " + file_.string() + ": " + e.what());
    }
}

std::string BaselineCache::key(std::uint64_t problem, std::uint64_t state, std::uint64_t seed) {
    std::ostringstream os;
    os << std::hex << problem << '-' << state << '-' << seed;
    return os.str();
}

std::optional<BaselineSolution> BaselineCache::find(std::uint64_t problem, std::uint64_t state,
                                                    std::uint64_t seed) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key(problem, state, seed));
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void BaselineCache::insert(std::uint64_t problem, std::uint64_t state, std::uint64_t seed,
                           const BaselineSolution& s) {
    std::lock_guard lock(mutex_);
    entries_[key(problem, state, seed)] = s;
}

std::size_t BaselineCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void BaselineCache::flush() const {
    if (file_.empty()) {
        return;
    }
    nlohmann::json doc;
    doc["format_version"] = 1;
    doc["entries"] = nlohmann::json::object();
    {
        std::lock_guard lock(mutex_);
        for (const auto& [k, v] : entries_) {
            doc["entries"][k] = to_json(v);
        }
    }
    auto tmp = file_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) {
            throw ConfigError("cannot write baseline cache " + tmp.string());
        }
        out << doc.dump() << '\n';
    }
    std::filesystem::rename(tmp, file_);
}

}  // namespace autoenv::opf

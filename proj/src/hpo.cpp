#include "autoenv/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "autoenv/errors.hpp"
#include "autoenv/hash.hpp"

namespace autoenv::hpo {

using env::DesignSpace;
using env::EnvDesign;
using env::VarType;
using Point = std::array<double, 2>;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Point as_point(const metrics::MetricPair& m) { return {*m.invalid_share, *m.mean_error}; }

std::optional<double> opt_from(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------

nlohmann::json to_json(const TrialRecord& r) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& s : r.seeds) {
        nlohmann::json cps = nlohmann::json::array();
        for (const auto& c : s.checkpoints) cps.push_back(metrics::to_json(c));
        seeds.push_back({{"seed", s.seed},
                         {"ok", s.ok},
                         {"error", s.error},
                         {"metrics", metrics::to_json(s.metrics)},
                         {"checkpoints", cps},
                         {"resampled_states", s.resampled_states}});
    }
    return {{"id", r.id},
            {"tag", r.tag},
            {"status", r.status == TrialStatus::complete ? "complete" : "failed"},
            {"design", env::to_json(r.design)},
            {"metrics", metrics::to_json(r.metrics)},
            {"invalid_share_std", opt(r.invalid_share_std)},
            {"mean_error_std", opt(r.mean_error_std)},
            {"seeds", seeds},
            {"checkpoint_fractions", r.checkpoint_fractions},
            {"wall_seconds", r.wall_seconds}};
}

TrialRecord trial_from_json(const nlohmann::json& doc) {
    try {
        TrialRecord r;
        r.id = doc.at("id").get<std::size_t>();
        r.tag = doc.value("tag", std::string("search"));
        r.status = doc.at("status").get<std::string>() == "complete" ? TrialStatus::complete : TrialStatus::failed;
        r.design = env::design_from_json(doc.at("design"));
        r.metrics = metrics::metric_pair_from_json(doc.at("metrics"));
        r.invalid_share_std = opt_from(doc, "invalid_share_std");
        r.mean_error_std = opt_from(doc, "mean_error_std");
        for (const auto& s : doc.at("seeds")) {
            SeedResult sr;
            sr.seed = s.at("seed").get<std::uint64_t>();
            sr.ok = s.at("ok").get<bool>();
            sr.error = s.value("error", std::string());
            sr.metrics = metrics::metric_pair_from_json(s.at("metrics"));
            for (const auto& c : s.at("checkpoints")) sr.checkpoints.push_back(metrics::metric_pair_from_json(c));
            sr.resampled_states = s.value("resampled_states", std::size_t{0});
            r.seeds.push_back(std::move(sr));
        }
        r.checkpoint_fractions = doc.value("checkpoint_fractions", std::vector<double>{});
        r.wall_seconds = doc.value("wall_seconds", 0.0);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed trial record: ") + e.what());
    }
}

void finalize(TrialRecord& r) {
    std::vector<metrics::MetricPair> ok;
    for (const auto& s : r.seeds) {
        if (s.ok) ok.push_back(s.metrics);
    }
    r.status = ok.empty() ? TrialStatus::failed : TrialStatus::complete;
    const auto agg = metrics::aggregate_seeds(ok);
    r.metrics = agg.mean;
    r.invalid_share_std = agg.invalid_share_std;
    r.mean_error_std = agg.mean_error_std;
}

// ---------------------------------------------------------------------------

bool dominates(const Point& p, const Point& q) {
    return p[0] <= q[0] && p[1] <= q[1] && (p[0] < q[0] || p[1] < q[1]);
}

std::vector<int> nondominated_sort(const std::vector<Point>& points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<int> count(n, 0);
    std::vector<int> rank(n, 0);
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(points[i], points[j])) {
                dominated[i].push_back(j);
            } else if (dominates(points[j], points[i])) {
                ++count[i];
            }
        }
        if (count[i] == 0) front.push_back(i);
    }
    int r = 0;
    while (!front.empty()) {
        std::vector<std::size_t> next;
        for (auto i : front) {
            rank[i] = r;
            for (auto j : dominated[i]) {
                if (--count[j] == 0) next.push_back(j);
            }
        }
        front = std::move(next);
        ++r;
    }
    return rank;
}

std::vector<int> nondominated_sort(const std::vector<metrics::MetricPair>& points) {
    std::vector<Point> complete;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].complete()) {
            complete.push_back(as_point(points[i]));
            where.push_back(i);
        }
    }
    const auto ranks = nondominated_sort(complete);
    const int worst = ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()) + 1;
    std::vector<int> out(points.size(), worst);
    for (std::size_t k = 0; k < where.size(); ++k) out[where[k]] = ranks[k];
    return out;
}

std::vector<double> crowding_distance(const std::vector<Point>& front) {
    const std::size_t n = front.size();
    std::vector<double> d(n, 0.0);
    if (n <= 2) {
        std::fill(d.begin(), d.end(), kInf);
        return d;
    }
    std::vector<std::size_t> idx(n);
    for (int m = 0; m < 2; ++m) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return front[a][m] < front[b][m]; });
        const double lo = front[idx.front()][m];
        const double hi = front[idx.back()][m];
        d[idx.front()] = kInf;
        d[idx.back()] = kInf;
        if (hi <= lo) continue;
        for (std::size_t k = 1; k + 1 < n; ++k) {
            d[idx[k]] += (front[idx[k + 1]][m] - front[idx[k - 1]][m]) / (hi - lo);
        }
    }
    return d;
}

double hypervolume_2d(std::vector<Point> points, const Point& ref) {
    std::erase_if(points, [&](const Point& p) { return !(p[0] < ref[0] && p[1] < ref[1]); });
    std::sort(points.begin(), points.end());
    double area = 0.0;
    double y = ref[1];
    for (const auto& p : points) {
        if (p[1] < y) {
            area += (ref[0] - p[0]) * (y - p[1]);
            y = p[1];
        }
    }
    return area;
}

std::vector<const TrialRecord*> pareto_front(const std::vector<TrialRecord>& trials) {
    std::vector<const TrialRecord*> rankable;
    std::vector<Point> pts;
    for (const auto& t : trials) {
        if (t.rankable()) {
            rankable.push_back(&t);
            pts.push_back(as_point(t.metrics));
        }
    }
    const auto ranks = nondominated_sort(pts);
    std::vector<const TrialRecord*> front;
    for (std::size_t i = 0; i < rankable.size(); ++i) {
        if (ranks[i] == 0) front.push_back(rankable[i]);
    }
    return front;
}

// ---------------------------------------------------------------------------

void SamplerConfig::validate() const {
    if (generation_size == 0) throw ConfigError("generation size must be positive");
    if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ConfigError("crossover probability outside [0, 1]");
    if (!(eta_crossover > 0.0) || !(eta_mutation > 0.0)) throw ConfigError("distribution indices must be positive");
    if (mutation_prob && !(*mutation_prob >= 0.0 && *mutation_prob <= 1.0)) {
        throw ConfigError("mutation probability outside [0, 1]");
    }
}

nlohmann::json to_json(const SamplerConfig& c) {
    return {{"generation_size", c.generation_size}, {"crossover_prob", c.crossover_prob},
            {"eta_crossover", c.eta_crossover},     {"eta_mutation", c.eta_mutation},
            {"mutation", c.mutation},               {"mutation_prob", opt(c.mutation_prob)}};
}

SamplerConfig sampler_config_from_json(const nlohmann::json& doc) {
    SamplerConfig c;
    try {
        c.generation_size = doc.value("generation_size", c.generation_size);
        c.crossover_prob = doc.value("crossover_prob", c.crossover_prob);
        c.eta_crossover = doc.value("eta_crossover", c.eta_crossover);
        c.eta_mutation = doc.value("eta_mutation", c.eta_mutation);
        c.mutation = doc.value("mutation", c.mutation);
        c.mutation_prob = opt_from(doc, "mutation_prob");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad sampler config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

struct Ranked {
    const TrialRecord* trial;
    int rank;
    double crowding;
};

/// Rank and crowding distance of each trial within the given population.
std::vector<Ranked> rank_population(const std::vector<const TrialRecord*>& trials) {
    std::vector<metrics::MetricPair> pts;
    for (auto* t : trials) pts.push_back(t->rankable() ? t->metrics : metrics::MetricPair{});
    const auto ranks = nondominated_sort(pts);
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < trials.size(); ++i) out.push_back({trials[i], ranks[i], 0.0});
    std::map<int, std::vector<std::size_t>> fronts;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (trials[i]->rankable()) fronts[out[i].rank].push_back(i);
    }
    for (const auto& [r, members] : fronts) {
        std::vector<Point> f;
        for (auto i : members) f.push_back(as_point(trials[i]->metrics));
        const auto cd = crowding_distance(f);
        for (std::size_t k = 0; k < members.size(); ++k) out[members[k]].crowding = cd[k];
    }
    return out;
}

bool better_ranked(const Ranked& a, const Ranked& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.crowding != b.crowding) return a.crowding > b.crowding;
    return a.trial->id < b.trial->id;
}

bool is_free(const env::VariableSpec& v) {
    return v.type == VarType::integer ? v.choices.size() > 1 : v.low < v.high;
}

double sbx_child(double y1, double y2, double lo, double hi, double eta, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::abs(y1 - y2) < 1e-14) {
        return y1;
    }
    const double a = std::min(y1, y2);
    const double b = std::max(y1, y2);
    const double r = unif(rng);
    auto betaq = [&](double beta) {
        const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        return r <= 1.0 / alpha ? std::pow(r * alpha, 1.0 / (eta + 1.0))
                                : std::pow(1.0 / (2.0 - r * alpha), 1.0 / (eta + 1.0));
    };
    const double c1 = 0.5 * ((a + b) - betaq(1.0 + 2.0 * (a - lo) / (b - a)) * (b - a));
    const double c2 = 0.5 * ((a + b) + betaq(1.0 + 2.0 * (hi - b) / (b - a)) * (b - a));
    return std::clamp(unif(rng) < 0.5 ? c1 : c2, lo, hi);
}

double polynomial_mutation(double y, double lo, double hi, double eta, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double span = hi - lo;
    const double d1 = (y - lo) / span;
    const double d2 = (hi - y) / span;
    const double r = unif(rng);
    const double pw = 1.0 / (eta + 1.0);
    double dq = 0.0;
    if (r < 0.5) {
        const double v = 2.0 * r + (1.0 - 2.0 * r) * std::pow(1.0 - d1, eta + 1.0);
        dq = std::pow(v, pw) - 1.0;
    } else {
        const double v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(1.0 - d2, eta + 1.0);
        dq = 1.0 - std::pow(v, pw);
    }
    return std::clamp(y + dq * span, lo, hi);
}

}  // namespace

std::vector<const TrialRecord*> select_elite(const std::vector<const TrialRecord*>& trials, std::size_t size) {
    auto ranked = rank_population(trials);
    std::sort(ranked.begin(), ranked.end(), better_ranked);
    std::vector<const TrialRecord*> out;
    for (std::size_t i = 0; i < ranked.size() && i < size; ++i) out.push_back(ranked[i].trial);
    return out;
}

EnvDesign make_offspring(const DesignSpace& space, const EnvDesign& a, const EnvDesign& b,
                         const SamplerConfig& config, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t n_free = 0;
    for (const auto& v : space.variables()) n_free += is_free(v);
    const double pm = config.mutation ? config.mutation_prob.value_or(n_free ? 1.0 / static_cast<double>(n_free) : 0.0)
                                      : 0.0;
    const bool cross = unif(rng) < config.crossover_prob;
    EnvDesign child = a;
    for (const auto& var : space.variables()) {
        if (!is_free(var)) continue;
        const double va = env::get_value(a, var.name);
        const double vb = env::get_value(b, var.name);
        double v = va;
        if (cross && unif(rng) < 0.5) {
            v = var.type == VarType::real ? sbx_child(va, vb, var.low, var.high, config.eta_crossover, rng) : vb;
        }
        if (pm > 0.0 && unif(rng) < pm) {
            switch (var.type) {
                case VarType::real:
                    v = polynomial_mutation(v, var.low, var.high, config.eta_mutation, rng);
                    break;
                case VarType::boolean:
                    v = v >= 0.5 ? 0.0 : 1.0;
                    break;
                case VarType::integer: {
                    std::vector<int> others;
                    for (int c : var.choices) {
                        if (c != static_cast<int>(v)) others.push_back(c);
                    }
                    v = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
                    break;
                }
            }
        }
        env::set_value(child, var.name, v);
    }
    space.repair(child);
    return child;
}

EnvDesign propose_design(const DesignSpace& space, const std::vector<TrialRecord>& history, std::size_t trial_id,
                         std::uint64_t study_seed, const SamplerConfig& config) {
    config.validate();
    std::mt19937_64 rng(mix_seed(study_seed, trial_id));
    const std::size_t g = config.generation_size;
    const std::size_t generation = trial_id / g;
    std::vector<const TrialRecord*> pool;
    for (const auto& t : history) {
        if (t.tag == "search" && t.id < generation * g) pool.push_back(&t);
    }
    if (generation == 0 || pool.empty()) {
        return space.sample(rng);
    }
    const auto elite = rank_population(select_elite(pool, g));
    auto tournament = [&]() -> const EnvDesign& {
        std::uniform_int_distribution<std::size_t> pick(0, elite.size() - 1);
        const Ranked& x = elite[pick(rng)];
        const Ranked& y = elite[pick(rng)];
        return (better_ranked(x, y) ? x : y).trial->design;
    };
    const EnvDesign& pa = tournament();
    const EnvDesign& pb = tournament();
    return make_offspring(space, pa, pb, config, rng);
}

// ---------------------------------------------------------------------------

const char* to_string(Criterion c) {
    switch (c) {
        case Criterion::pareto: return "pareto";
        case Criterion::validity: return "validity";
        case Criterion::optimization: return "optimization";
        case Criterion::utopia: return "utopia";
    }
    return "?";
}

Criterion criterion_from_string(const std::string& s) {
    for (auto c : {Criterion::pareto, Criterion::validity, Criterion::optimization, Criterion::utopia}) {
        if (s == to_string(c)) return c;
    }
    throw ConfigError("unknown criterion '" + s + "' (pareto, validity, optimization, utopia)");
}

std::vector<std::optional<double>> utopia_scores(const std::vector<TrialRecord>& trials) {
    double lo[2] = {kInf, kInf};
    double hi[2] = {-kInf, -kInf};
    for (const auto& t : trials) {
        if (!t.rankable()) continue;
        const Point p = as_point(t.metrics);
        for (int m = 0; m < 2; ++m) {
            lo[m] = std::min(lo[m], p[m]);
            hi[m] = std::max(hi[m], p[m]);
        }
    }
    std::vector<std::optional<double>> out(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (!trials[i].rankable()) continue;
        const Point p = as_point(trials[i].metrics);
        double s = 0.0;
        for (int m = 0; m < 2; ++m) s += hi[m] > lo[m] ? (p[m] - lo[m]) / (hi[m] - lo[m]) : 0.0;
        out[i] = s;
    }
    return out;
}

std::vector<const TrialRecord*> order_trials(const std::vector<TrialRecord>& trials, Criterion c) {
    std::vector<std::size_t> idx;
    std::vector<Point> pts;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].rankable()) {
            idx.push_back(i);
            pts.push_back(as_point(trials[i].metrics));
        }
    }
    std::vector<double> key(trials.size(), 0.0);
    switch (c) {
        case Criterion::pareto: {
            const auto ranks = nondominated_sort(pts);
            for (std::size_t k = 0; k < idx.size(); ++k) key[idx[k]] = ranks[k];
            break;
        }
        case Criterion::validity:
            for (std::size_t k = 0; k < idx.size(); ++k) key[idx[k]] = pts[k][0];
            break;
        case Criterion::optimization:
            for (std::size_t k = 0; k < idx.size(); ++k) key[idx[k]] = pts[k][1];
            break;
        case Criterion::utopia: {
            const auto u = utopia_scores(trials);
            for (auto i : idx) key[i] = *u[i];
            break;
        }
    }
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
        if (key[a] != key[b]) return key[a] < key[b];
        return trials[a].id < trials[b].id;
    });
    std::vector<const TrialRecord*> out;
    for (auto i : idx) out.push_back(&trials[i]);
    return out;
}

EnvDesign combine_designs(const DesignSpace& space, const std::vector<EnvDesign>& designs) {
    if (designs.empty()) {
        throw ConfigError("no designs to combine");
    }
    if (designs.size() == 1) {
        return designs.front();
    }
    const EnvDesign reference = env::baseline_design(0.5);
    EnvDesign out = designs.front();
    for (const auto& var : space.variables()) {
        std::vector<double> vals;
        for (const auto& d : designs) vals.push_back(env::get_value(d, var.name));
        if (var.type == VarType::real) {
            // Offset form keeps identical inputs bit-exact.
            double acc = 0.0;
            for (double v : vals) acc += v - vals.front();
            env::set_value(out, var.name, vals.front() + acc / static_cast<double>(vals.size()));
            continue;
        }
        std::map<double, int> counts;
        for (double v : vals) ++counts[v];
        int best = 0;
        for (const auto& [v, n] : counts) best = std::max(best, n);
        const double ref = env::get_value(reference, var.name);
        double pick = std::numeric_limits<double>::quiet_NaN();
        for (const auto& [v, n] : counts) {
            if (n != best) continue;
            if (v == ref) {
                pick = v;
                break;
            }
            if (std::isnan(pick)) pick = v;
        }
        env::set_value(out, var.name, pick);
    }
    const double sum = out.normal_data + out.uniform_data + out.realistic_data;
    if (std::abs(sum - 1.0) > 1e-12 && sum > 0.0) {
        out.normal_data /= sum;
        out.uniform_data /= sum;
        out.realistic_data /= sum;
    }
    if (!space.contains(out)) {
        space.repair(out);
    }
    return out;
}

EnvDesign extract_design(const DesignSpace& space, const std::vector<TrialRecord>& trials, Criterion c,
                         std::size_t k) {
    if (k == 0) throw ConfigError("extraction needs k >= 1");
    const auto ordered = order_trials(trials, c);
    if (ordered.empty()) {
        throw ConfigError("no complete trial to extract a design from");
    }
    std::vector<EnvDesign> designs;
    for (std::size_t i = 0; i < ordered.size() && i < k; ++i) designs.push_back(ordered[i]->design);
    return combine_designs(space, designs);
}

}  // namespace autoenv::hpo

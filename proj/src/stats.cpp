#include "autoenv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "autoenv/errors.hpp"
#include "autoenv/special_functions.hpp"

namespace autoenv::stats {

namespace {

void moments(std::span<const double> v, double& mean, double& var) {
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    var = ss / static_cast<double>(v.size() - 1);
}

}  // namespace

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw UsageError("Welch's t-test needs at least two values per sample");
    }
    double ma = 0.0;
    double va = 0.0;
    double mb = 0.0;
    double vb = 0.0;
    moments(a, ma, va);
    moments(b, mb, vb);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double sa = va / na;
    const double sb = vb / nb;
    WelchResult r;
    if (sa + sb == 0.0) {
        r.degenerate = true;
        r.p = ma == mb ? 1.0 : 0.0;
        r.t = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
        return r;
    }
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    r.p = std::clamp(student_t_two_sided(r.t, r.df), 0.0, 1.0);
    return r;
}

ChiSquaredResult chi_squared_test(std::span<const double> row0, std::span<const double> row1) {
    if (row0.size() != row1.size()) {
        throw UsageError("contingency rows differ in length");
    }
    const std::size_t k = row0.size();
    ChiSquaredResult r;
    r.dof = static_cast<int>(k) - 1;
    double n0 = 0.0;
    double n1 = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        n0 += row0[j];
        n1 += row1[j];
    }
    bool zero_margin = k < 2 || n0 <= 0.0 || n1 <= 0.0;
    for (std::size_t j = 0; j < k; ++j) zero_margin = zero_margin || row0[j] + row1[j] <= 0.0;
    if (zero_margin) {
        r.degenerate = true;
        r.p = 1.0;
        return r;
    }
    const double n = n0 + n1;
    for (std::size_t j = 0; j < k; ++j) {
        const double col = row0[j] + row1[j];
        const double e0 = n0 * col / n;
        const double e1 = n1 * col / n;
        r.statistic += (row0[j] - e0) * (row0[j] - e0) / e0 + (row1[j] - e1) * (row1[j] - e1) / e1;
    }
    r.p = std::clamp(chi_squared_sf(r.statistic, r.dof), 0.0, 1.0);
    return r;
}

FisherResult fisher_combine(std::span<const double> p_values) {
    if (p_values.empty()) {
        throw UsageError("Fisher's method needs at least one p-value");
    }
    FisherResult r;
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw UsageError("p-values must lie in [0, 1]");
        r.statistic -= 2.0 * std::log(std::max(p, 1e-300));
    }
    r.dof = 2 * static_cast<int>(p_values.size());
    r.p = std::clamp(chi_squared_sf(r.statistic, r.dof), 0.0, 1.0);
    return r;
}

TrialSplit split_trials(const std::vector<hpo::TrialRecord>& trials, hpo::Criterion criterion, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("split fraction must lie in (0, 1)");
    }
    TrialSplit s;
    if (criterion == hpo::Criterion::pareto) {
        const auto front = hpo::pareto_front(trials);
        const std::set<const hpo::TrialRecord*> in(front.begin(), front.end());
        for (const auto& t : trials) {
            if (!t.rankable()) continue;
            (in.count(&t) ? s.top : s.rest).push_back(&t);
        }
        return s;
    }
    const auto ordered = hpo::order_trials(trials, criterion);
    if (ordered.empty()) return s;
    const auto n_top = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ordered.size()))), 1, ordered.size());
    s.top.assign(ordered.begin(), ordered.begin() + static_cast<std::ptrdiff_t>(n_top));
    s.rest.assign(ordered.begin() + static_cast<std::ptrdiff_t>(n_top), ordered.end());
    return s;
}

namespace {

SignificanceEntry test_variable(const env::VariableSpec& var, const TrialSplit& split) {
    SignificanceEntry e;
    e.variable = var.name;
    e.n_top = split.top.size();
    e.n_rest = split.rest.size();
    std::vector<double> top;
    std::vector<double> rest;
    for (auto* t : split.top) top.push_back(env::get_value(t->design, var.name));
    for (auto* t : split.rest) rest.push_back(env::get_value(t->design, var.name));
    const bool fixed = var.type == env::VarType::integer ? var.choices.size() < 2 : var.low >= var.high;
    if (fixed) {
        e.test = "untestable";
        e.note = "fixed in the design space";
        return e;
    }
    if (top.size() < 2 || rest.size() < 2) {
        e.test = "untestable";
        e.note = "fewer than two trials in a group";
        return e;
    }
    if (var.type == env::VarType::real) {
        const auto w = welch_t_test(top, rest);
        e.test = "welch";
        e.p = w.p;
        e.degenerate = w.degenerate;
        for (double v : top) e.top_mean += v;
        for (double v : rest) e.rest_mean += v;
        e.top_mean /= static_cast<double>(top.size());
        e.rest_mean /= static_cast<double>(rest.size());
        e.top_value = e.top_mean;
    } else {
        std::set<double> observed(top.begin(), top.end());
        observed.insert(rest.begin(), rest.end());
        e.values.assign(observed.begin(), observed.end());
        e.counts.assign(2, std::vector<double>(e.values.size(), 0.0));
        auto col = [&](double v) {
            return static_cast<std::size_t>(std::lower_bound(e.values.begin(), e.values.end(), v) - e.values.begin());
        };
        for (double v : top) e.counts[0][col(v)] += 1.0;
        for (double v : rest) e.counts[1][col(v)] += 1.0;
        const auto c = chi_squared_test(e.counts[0], e.counts[1]);
        e.test = "chi-squared";
        e.p = c.p;
        e.degenerate = c.degenerate;
        if (c.degenerate) e.note = "degenerate contingency table";
        std::size_t best = 0;
        for (std::size_t j = 1; j < e.values.size(); ++j) {
            if (e.counts[0][j] > e.counts[0][best]) best = j;
        }
        e.top_value = e.values[best];
        for (double v : top) e.top_mean += v;
        for (double v : rest) e.rest_mean += v;
        e.top_mean /= static_cast<double>(top.size());
        e.rest_mean /= static_cast<double>(rest.size());
    }
    e.significant = e.p < kSignificanceLevel;
    return e;
}

}  // namespace

SignificanceReport significance_report(const std::vector<EnvironmentTrials>& studies, const env::DesignSpace& space,
                                       const std::vector<hpo::Criterion>& criteria, double fraction) {
    SignificanceReport report;
    report.fraction = fraction;
    for (const auto& study : studies) {
        for (auto c : criteria) {
            const auto split = split_trials(study.trials, c, fraction);
            for (const auto& var : space.variables()) {
                auto e = test_variable(var, split);
                e.environment = study.name;
                e.criterion = c;
                report.entries.push_back(std::move(e));
            }
        }
    }
    if (studies.size() > 1 && std::find(criteria.begin(), criteria.end(), hpo::Criterion::pareto) != criteria.end()) {
        for (const auto& var : space.variables()) {
            std::vector<double> ps;
            for (const auto& e : report.entries) {
                if (e.variable == var.name && e.criterion == hpo::Criterion::pareto && e.test != "untestable") {
                    ps.push_back(e.p);
                }
            }
            SignificanceEntry combined;
            combined.environment = "combined";
            combined.variable = var.name;
            combined.criterion = hpo::Criterion::pareto;
            if (ps.empty()) {
                combined.test = "untestable";
                combined.note = "no testable environment";
            } else {
                combined.test = "fisher";
                combined.p = fisher_combine(ps).p;
                combined.significant = combined.p < kSignificanceLevel;
                combined.note = std::to_string(ps.size()) + " environments";
            }
            report.entries.push_back(std::move(combined));
        }
    }
    return report;
}

nlohmann::json to_json(const SignificanceReport& r) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        nlohmann::json j = {{"environment", e.environment},
                            {"variable", e.variable},
                            {"criterion", hpo::to_string(e.criterion)},
                            {"test", e.test},
                            {"p", e.p},
                            {"significant", e.significant},
                            {"degenerate", e.degenerate},
                            {"n_top", e.n_top},
                            {"n_rest", e.n_rest},
                            {"top_value", e.top_value},
                            {"top_mean", e.top_mean},
                            {"rest_mean", e.rest_mean},
                            {"note", e.note}};
        if (!e.values.empty()) {
            j["values"] = e.values;
            j["counts"] = e.counts;
        }
        entries.push_back(std::move(j));
    }
    return {{"fraction", r.fraction}, {"alpha", kSignificanceLevel}, {"note", r.note}, {"entries", entries}};
}

std::string to_csv(const SignificanceReport& r) {
    std::ostringstream os;
    os.precision(10);
    os << "environment,variable,criterion,test,p,significant,n_top,n_rest,top_value,rest_mean,note\n";
    for (const auto& e : r.entries) {
        os << e.environment << ',' << e.variable << ',' << hpo::to_string(e.criterion) << ',' << e.test << ','
           << e.p << ',' << (e.significant ? "yes" : "no") << ',' << e.n_top << ',' << e.n_rest << ','
           << e.top_value << ',' << e.rest_mean << ',' << e.note << '\n';
    }
    return os.str();
}

}  // namespace autoenv::stats

#include "autoenv/metrics.hpp"

#include <cmath>
#include <sstream>

#include "autoenv/errors.hpp"
#include "autoenv/kernels.hpp"

namespace autoenv::metrics {

EvalReport make_report(std::vector<StateRecord> records) {
    EvalReport r;
    r.records = std::move(records);
    double err = 0.0;
    for (const auto& s : r.records) {
        r.n_valid += s.valid;
        r.n_valid_baseline += s.baseline_valid;
        if (s.valid && s.baseline_valid) {
            ++r.n_mutual;
            err += s.objective - s.baseline_objective;
        }
    }
    if (r.n_valid_baseline > 0) {
        r.metrics.invalid_share =
            1.0 - static_cast<double>(r.n_valid) / static_cast<double>(r.n_valid_baseline);
    } else {
        r.diagnostic = "baseline valid on no state of the split; invalid share undefined, regenerate the split";
    }
    if (r.n_mutual > 0) {
        r.metrics.mean_error = err / static_cast<double>(r.n_mutual);
    } else if (r.diagnostic.empty()) {
        r.diagnostic = "no state valid for both agent and baseline; mean error missing";
    }
    return r;
}

EvalReport evaluate_policy(const rl::TrainedPolicy& policy, std::shared_ptr<const env::EnvData> data,
                           const env::EnvDesign& design, const env::NormStats& stats, env::Mode mode,
                           const std::vector<opf::BaselineSolution>& baselines, int threads) {
    return make_report(kernels::rollout(policy, std::move(data), design, stats, mode, baselines, threads));
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::optional<double> std_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    if (v.size() == 1) return 0.0;
    const double m = *mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void split(const std::vector<MetricPair>& pairs, std::vector<double>& omega, std::vector<double>& dj) {
    for (const auto& p : pairs) {
        if (p.invalid_share) omega.push_back(*p.invalid_share);
        if (p.mean_error) dj.push_back(*p.mean_error);
    }
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<double>();
}

}  // namespace

MetricPair aggregate_pairs(const std::vector<MetricPair>& pairs) {
    std::vector<double> omega;
    std::vector<double> dj;
    split(pairs, omega, dj);
    return {mean_of(omega), mean_of(dj)};
}

MetricPair aggregate_checkpoints(const std::vector<EvalReport>& reports) {
    std::vector<MetricPair> pairs;
    pairs.reserve(reports.size());
    for (const auto& r : reports) pairs.push_back(r.metrics);
    return aggregate_pairs(pairs);
}

SeedAggregate aggregate_seeds(const std::vector<MetricPair>& pairs) {
    std::vector<double> omega;
    std::vector<double> dj;
    split(pairs, omega, dj);
    return {{mean_of(omega), mean_of(dj)}, std_of(omega), std_of(dj)};
}

nlohmann::json to_json(const MetricPair& m) {
    return {{"invalid_share", opt(m.invalid_share)}, {"mean_error", opt(m.mean_error)}};
}

MetricPair metric_pair_from_json(const nlohmann::json& doc) {
    return {opt_from(doc, "invalid_share"), opt_from(doc, "mean_error")};
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& s : r.records) {
        recs.push_back({{"index", s.index},
                        {"objective", s.objective},
                        {"baseline_objective", s.baseline_objective},
                        {"valid", s.valid},
                        {"baseline_valid", s.baseline_valid}});
    }
    return {{"metrics", to_json(r.metrics)},
            {"n_valid", r.n_valid},
            {"n_valid_baseline", r.n_valid_baseline},
            {"n_mutual", r.n_mutual},
            {"diagnostic", r.diagnostic},
            {"records", recs}};
}

EvalReport eval_report_from_json(const nlohmann::json& doc) {
    std::vector<StateRecord> recs;
    for (const auto& j : doc.at("records")) {
        StateRecord s;
        s.index = j.at("index").get<std::size_t>();
        s.objective = j.at("objective").get<double>();
        s.baseline_objective = j.at("baseline_objective").get<double>();
        s.valid = j.at("valid").get<bool>();
        s.baseline_valid = j.at("baseline_valid").get<bool>();
        recs.push_back(s);
    }
    return make_report(std::move(recs));
}

std::string records_csv(const EvalReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "index,objective,baseline_objective,valid,baseline_valid\n";
    for (const auto& s : r.records) {
        os << s.index << ',' << s.objective << ',' << s.baseline_objective << ',' << int(s.valid) << ','
           << int(s.baseline_valid) << '\n';
    }
    return os.str();
}

}  // namespace autoenv::metrics

#include "autoenv/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "autoenv/errors.hpp"
#include "autoenv/hash.hpp"
#include "autoenv/kernels.hpp"
#include "autoenv/report.hpp"
#include "autoenv/stats.hpp"

namespace autoenv::cli {

namespace fs = std::filesystem;
using report::fmt;

namespace {

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string metric_cell(const std::optional<double>& v) { return v ? fmt(*v, 4) : "-"; }

void print_trial(std::ostream& out, const hpo::TrialRecord& t) {
    std::size_t ok = 0;
    for (const auto& s : t.seeds) ok += s.ok ? 1 : 0;
    out << std::setw(5) << t.id << "  " << std::setw(9) << t.tag << "  " << std::setw(10)
        << metric_cell(t.metrics.invalid_share) << "  " << std::setw(10) << metric_cell(t.metrics.mean_error) << "  "
        << ok << '/' << t.seeds.size() << "  " << (t.status == hpo::TrialStatus::complete ? "complete" : "failed")
        << "  " << fmt(t.wall_seconds, 4) << "s\n";
    for (const auto& s : t.seeds) {
        if (!s.ok) out << "       seed " << s.seed << " failed: " << s.error << '\n';
    }
    out.flush();
}

void print_header(std::ostream& out) {
    out << "trial        tag       omega     mean_dJ  seeds  status\n";
}

std::vector<hpo::TrialRecord> load_sweep(const fs::path& dir) {
    hpo::StudyStore store(dir, "baseline");
    if (!fs::exists(store.trials_file())) return {};
    return store.load();
}

/// Directories named on the command line, else --out, else the resolved default.
std::vector<fs::path> study_dirs(const CommandOptions& o) {
    if (!o.studies.empty()) return o.studies;
    return {resolve_study_dir(o, resolve_config(o))};
}

std::vector<hpo::Criterion> parse_criteria(const std::vector<std::string>& names) {
    std::vector<hpo::Criterion> out;
    if (names.empty()) {
        return {hpo::Criterion::pareto, hpo::Criterion::validity, hpo::Criterion::optimization,
                hpo::Criterion::utopia};
    }
    for (const auto& n : names) out.push_back(hpo::criterion_from_string(n));
    return out;
}

hpo::StudyConfig with_flags(hpo::StudyConfig c, const CommandOptions& o) {
    if (o.benchmark) c.benchmark = opf::benchmark_from_string(*o.benchmark);
    if (o.trials) c.trials = *o.trials;
    if (o.seeds) c.seeds = *o.seeds;
    if (o.steps) c.steps = *o.steps;
    if (o.workers) c.workers = *o.workers;
    if (o.seed) c.seed = *o.seed;
    return c;
}

}  // namespace

hpo::StudyConfig resolve_config(const CommandOptions& o) {
    hpo::StudyConfig c;
    if (o.config) {
        c = hpo::study_config_from_json(read_json(*o.config));
    } else if (o.out && fs::exists(*o.out / "config.json")) {
        c = hpo::StudyStore(*o.out).load_config();
    }
    return with_flags(std::move(c), o);
}

fs::path resolve_study_dir(const CommandOptions& o, const hpo::StudyConfig& c) {
    if (o.out) return *o.out;
    const std::string name = opf::to_string(c.benchmark);
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') return fs::path(root) / name;
    return fs::path("studies") / name;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int cmd_study(const CommandOptions& o, std::ostream& out) {
    const auto config = resolve_config(o);
    config.validate();
    const auto dir = resolve_study_dir(o, config);
    if (o.dry_run) {
        out << "study directory: " << dir.string() << '\n';
        out << "design space: " << config.design_space().to_json().dump() << '\n';
        out << hpo::to_json(config).dump(2) << '\n';
        return kExitOk;
    }
    bool failed = false;
    hpo::StudyOptions opts;
    if (!o.quiet) print_header(out);
    opts.on_trial = [&](const hpo::TrialRecord& t) {
        failed = failed || t.status == hpo::TrialStatus::failed;
        if (!o.quiet) print_trial(out, t);
    };
    const auto study = hpo::run_study(config, dir, opts);
    for (const auto& t : study.trials) failed = failed || t.status == hpo::TrialStatus::failed;
    const auto front = hpo::pareto_front(study.trials);
    out << study.trials.size() << " trials in " << dir.string() << ", " << front.size() << " non-dominated:";
    for (auto* t : front) out << ' ' << t->id;
    out << '\n';
    return failed ? kExitFailure : kExitOk;
}

int cmd_baseline(const CommandOptions& o, std::ostream& out) {
    auto config = resolve_config(o);
    const auto dir = resolve_study_dir(o, config);
    if (!o.config && fs::exists(dir / "config.json")) config = with_flags(hpo::StudyStore(dir).load_config(), o);
    const std::size_t seeds = o.seeds.value_or(10);
    config.validate();
    if (o.dry_run) {
        out << "baseline sweep in " << dir.string() << " with " << seeds << " seeds, weights";
        for (double w : o.weights) out << ' ' << w;
        out << '\n';
        return kExitOk;
    }
    hpo::StudyOptions opts;
    if (!o.quiet) print_header(out);
    opts.on_trial = [&](const hpo::TrialRecord& t) {
        if (!o.quiet) print_trial(out, t);
    };
    const auto sweep = hpo::run_baseline_sweep(config, dir, seeds, o.weights, opts);
    bool failed = false;
    for (const auto& t : sweep) {
        failed = failed || t.status == hpo::TrialStatus::failed;
        out << "weight " << fmt(t.design.penalty_weight, 3) << ": omega " << metric_cell(t.metrics.invalid_share)
            << ", mean_dJ " << metric_cell(t.metrics.mean_error) << '\n';
    }
    if (const auto w = best_utopia_baseline_weight(sweep)) out << "best utopia weight: " << fmt(*w, 3) << '\n';
    out << "default weight for " << opf::to_string(config.benchmark) << ": "
        << fmt(default_baseline_weight(config.benchmark), 3) << '\n';
    return failed ? kExitFailure : kExitOk;
}

int cmd_analyze(const CommandOptions& o, std::ostream& out) {
    const auto dirs = study_dirs(o);
    const auto criteria = parse_criteria(o.criteria);
    std::vector<stats::EnvironmentTrials> envs;
    std::optional<env::DesignSpace> space;
    std::set<std::string> names;
    for (const auto& d : dirs) {
        auto study = hpo::load_study(d);
        if (!space) space = study.config.design_space();
        std::string name = opf::to_string(study.config.benchmark);
        if (names.count(name)) name += "@" + d.filename().string();
        names.insert(name);
        stats::EnvironmentTrials e;
        e.name = name;
        for (auto& t : study.trials) {
            if (t.tag == "search" && t.rankable()) e.trials.push_back(std::move(t));
        }
        const auto sweep = load_sweep(d);
        write_file(d / "analysis" / "pareto.svg", report::pareto_svg(e.trials, sweep, name));
        envs.push_back(std::move(e));
    }
    const auto rep = stats::significance_report(envs, *space, criteria, o.fraction);
    const fs::path target = (o.out && !o.studies.empty()) ? *o.out : dirs.front() / "analysis";
    write_file(target / "significance.json", stats::to_json(rep).dump(2) + "\n");
    write_file(target / "significance.csv", stats::to_csv(rep));
    std::size_t hits = 0;
    for (const auto& e : rep.entries) {
        if (!e.significant) continue;
        ++hits;
        out << e.environment << "  " << std::setw(22) << std::left << e.variable << std::right << "  "
            << std::setw(12) << hpo::to_string(e.criterion) << "  " << e.test << "  p=" << fmt(e.p, 3)
            << "  top=" << fmt(e.top_value, 4) << '\n';
    }
    out << hits << " of " << rep.entries.size() << " tests significant at " << stats::kSignificanceLevel
        << " (no multiple-testing correction); written to " << target.string() << '\n';
    return kExitOk;
}

namespace {

struct VerifyRun {
    std::string variant;
    std::string design_label;
    std::vector<std::size_t> steps;
    // [seed][eval point]
    std::vector<std::vector<metrics::MetricPair>> points;
    std::vector<metrics::MetricPair> finals;
};

double mean_of(const std::vector<metrics::MetricPair>& v, bool omega) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& m : v) {
        const auto& x = omega ? m.invalid_share : m.mean_error;
        if (x) {
            s += *x;
            ++n;
        }
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(n);
}

}  // namespace

int cmd_verify(const CommandOptions& o, std::ostream& out) {
    const auto dir = study_dirs(o).front();
    auto study = hpo::load_study(dir);
    auto config = with_flags(study.config, o);
    const std::size_t seeds = o.seeds.value_or(config.seeds);
    const auto space = config.design_space();
    std::vector<hpo::TrialRecord> search;
    for (const auto& t : study.trials) {
        if (t.tag == "search") search.push_back(t);
    }
    const auto criterion = hpo::criterion_from_string(o.criterion);
    const auto extracted = hpo::extract_design(space, search, criterion, o.k);
    double weight = default_baseline_weight(config.benchmark);
    if (o.baseline_weight) {
        weight = *o.baseline_weight;
    } else if (const auto w = best_utopia_baseline_weight(load_sweep(dir))) {
        weight = *w;
    }
    const auto baseline = env::baseline_design(weight);
    const std::size_t steps = o.steps.value_or(o.verify_steps);
    const std::size_t every = o.eval_every > 0 ? o.eval_every : std::max<std::size_t>(1, steps / 20);
    for (const auto& v : o.variants) {
        if (v != "default" && v != "paper-size") throw ConfigError("unknown verify variant: " + v);
    }
    if (o.dry_run) {
        out << "extracted (" << o.criterion << ", k=" << o.k << "): " << env::to_json(extracted).dump() << '\n';
        out << "baseline weight " << fmt(weight, 3) << ", " << steps << " steps, eval every " << every << ", "
            << seeds << " seeds\n";
        return kExitOk;
    }

    // Final training on every non-test row, evaluation on the test split.
    auto problem = opf::make_benchmark(config.benchmark, config.scale);
    auto dataset = data::generate_timeseries(problem.timeseries_config(config.dataset_length), config.dataset_seed);
    auto splits = data::nested_split(dataset, config.split);
    {
        const std::set<std::size_t> test(splits.test.begin(), splits.test.end());
        splits.train.clear();
        for (std::size_t r = 0; r < dataset.length(); ++r) {
            if (!test.count(r)) splits.train.push_back(r);
        }
    }
    const auto data = env::make_env_data(std::move(problem), std::move(dataset), std::move(splits));
    opf::BaselineCache cache(dir / "baselines.json");
    const auto test_baselines = kernels::baselines_for_split(*data, env::Mode::test, config.baseline, &cache);
    if (!o.quiet) out << test_baselines.size() << " test states\n";

    const std::uint64_t verify_seed = mix_seed(config.seed, 0x7E57);
    std::vector<VerifyRun> runs;
    for (const auto& variant : o.variants) {
        auto vc = config;
        if (variant == "paper-size") {
            const auto big = rl::DdpgConfig::paper_size();
            vc.ddpg.hidden = big.hidden;
        }
        const std::pair<std::string, env::EnvDesign> designs[] = {{"extracted", extracted}, {"baseline", baseline}};
        for (const auto& [label, design] : designs) {
            VerifyRun run;
            run.variant = variant;
            run.design_label = label;
            for (std::size_t s = 0; s < seeds; ++s) {
                const auto seed = hpo::seed_for(verify_seed, s, 0);
                std::vector<metrics::MetricPair> curve;
                std::vector<std::size_t> at;
                env::NormStats stats_holder;
                rl::TrainOptions extra;
                extra.eval_every = every;
                // Calibration is deterministic in the seed, so the stats used
                // here match those train_design computes internally.
                std::mt19937_64 calib(mix_seed(seed, 0xCA1));
                stats_holder = env::calibrate_normalization(design, *data, vc.calibration_samples, calib);
                extra.on_eval = [&](std::size_t step, const rl::TrainedPolicy& p) {
                    const auto r = metrics::evaluate_policy(p, data, design, stats_holder, env::Mode::test,
                                                            test_baselines, 0);
                    curve.push_back(r.metrics);
                    at.push_back(step);
                };
                try {
                    const auto outcome = hpo::train_design(data, design, vc, steps, seed, extra);
                    const auto final_report = metrics::evaluate_policy(
                        outcome.training.final_policy, data, design, outcome.stats, env::Mode::test, test_baselines, 0);
                    run.finals.push_back(final_report.metrics);
                    run.points.push_back(std::move(curve));
                    run.steps = at;
                } catch (const TrainingFailure& e) {
                    out << variant << '/' << label << " seed " << seed << " failed: " << e.what() << '\n';
                }
                if (!o.quiet) {
                    out << variant << '/' << label << " seed " << s + 1 << '/' << seeds << " done\n";
                    out.flush();
                }
            }
            runs.push_back(std::move(run));
        }
    }

    nlohmann::json summary = {{"study", dir.string()},
                              {"criterion", o.criterion},
                              {"k", o.k},
                              {"extracted_design", env::to_json(extracted)},
                              {"baseline_weight", weight},
                              {"steps", steps},
                              {"eval_every", every},
                              {"seeds", seeds},
                              {"test_states", test_baselines.size()}};
    nlohmann::json results = nlohmann::json::array();
    std::vector<report::Curve> omega_curves;
    std::vector<report::Curve> error_curves;
    bool failed = false;
    for (const auto& run : runs) {
        failed = failed || run.finals.size() < seeds;
        const double omega = mean_of(run.finals, true);
        const double error = mean_of(run.finals, false);
        results.push_back({{"variant", run.variant},
                           {"design", run.design_label},
                           {"successful_seeds", run.finals.size()},
                           {"invalid_share", std::isnan(omega) ? nlohmann::json() : nlohmann::json(omega)},
                           {"mean_error", std::isnan(error) ? nlohmann::json() : nlohmann::json(error)}});
        out << std::setw(10) << run.variant << "  " << std::setw(9) << run.design_label << "  omega " << fmt(omega, 4)
            << "  mean_dJ " << fmt(error, 4) << '\n';
        std::vector<double> om;
        std::vector<double> er;
        for (std::size_t i = 0; i < run.steps.size(); ++i) {
            std::vector<metrics::MetricPair> at;
            for (const auto& c : run.points) {
                if (i < c.size()) at.push_back(c[i]);
            }
            om.push_back(mean_of(at, true));
            er.push_back(mean_of(at, false));
        }
        om = report::rolling_average(om, 2);
        er = report::rolling_average(er, 2);
        report::Curve co{run.variant + "/" + run.design_label, {}};
        report::Curve ce{co.label, {}};
        for (std::size_t i = 0; i < run.steps.size(); ++i) {
            co.points.emplace_back(static_cast<double>(run.steps[i]), om[i]);
            ce.points.emplace_back(static_cast<double>(run.steps[i]), er[i]);
        }
        omega_curves.push_back(std::move(co));
        error_curves.push_back(std::move(ce));
    }
    summary["results"] = results;
    const fs::path target = (o.out && !o.studies.empty()) ? *o.out : dir / "verify";
    write_file(target / "summary.json", summary.dump(2) + "\n");
    write_file(target / "invalid_share.csv", report::curves_csv(omega_curves));
    write_file(target / "mean_error.csv", report::curves_csv(error_curves));
    write_file(target / "invalid_share.svg", report::curves_svg(omega_curves, "test invalid share", "invalid share"));
    write_file(target / "mean_error.svg", report::curves_svg(error_curves, "test mean error", "mean error"));
    out << "written to " << target.string() << '\n';
    return failed ? kExitFailure : kExitOk;
}

int cmd_plot(const CommandOptions& o, std::ostream& out) {
    for (const auto& dir : study_dirs(o)) {
        const auto study = hpo::load_study(dir);
        const auto sweep = load_sweep(dir);
        const fs::path target = dir / "plots";
        write_file(target / "trials.csv", report::trials_csv(study.trials));
        if (!sweep.empty()) write_file(target / "baseline.csv", report::trials_csv(sweep));
        write_file(target / "pareto.svg",
                   report::pareto_svg(study.trials, sweep, opf::to_string(study.config.benchmark)));
        std::string hv = "trial,hypervolume\n";
        const auto hist = hpo::hypervolume_history(study.trials);
        for (std::size_t i = 0; i < hist.size(); ++i) hv += std::to_string(i) + "," + fmt(hist[i], 10) + "\n";
        write_file(target / "hypervolume.csv", hv);
        out << "plots for " << study.trials.size() << " trials written to " << target.string() << '\n';
    }
    return kExitOk;
}

std::optional<double> best_utopia_baseline_weight(const std::vector<hpo::TrialRecord>& sweep) {
    const auto scores = hpo::utopia_scores(sweep);
    std::optional<double> best;
    double best_score = 0.0;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (sweep[i].tag != "baseline" || !scores[i]) continue;
        if (!best || *scores[i] < best_score) {
            best = sweep[i].design.penalty_weight;
            best_score = *scores[i];
        }
    }
    return best;
}

double default_baseline_weight(opf::BenchmarkKind kind) {
    switch (kind) {
        case opf::BenchmarkKind::economic_dispatch: return 0.5;
        case opf::BenchmarkKind::voltage_control: return 0.1;
        default: return 0.5;
    }
}

}  // namespace autoenv::cli

#include "autoenv/study.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "autoenv/errors.hpp"
#include "autoenv/hash.hpp"
#include "autoenv/kernels.hpp"

namespace autoenv::hpo {

namespace fs = std::filesystem;

env::DesignSpace StudyConfig::design_space() const {
    auto space = env::DesignSpace::standard(multi_step);
    space.apply_overrides(design_overrides);
    return space;
}

void StudyConfig::validate() const {
    if (seeds == 0) throw ConfigError("at least one seed per trial is required");
    if (steps == 0) throw ConfigError("steps per run must be positive");
    if (workers == 0) throw ConfigError("worker count must be positive");
    if (calibration_samples < 100) throw ConfigError("calibration needs at least 100 samples");
    if (dataset_length == 0) throw ConfigError("dataset length must be positive");
    if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
        throw ConfigError("test fraction must lie in (0, 1)");
    }
    ddpg.validate();
    sampler.validate();
    if (steps < ddpg.start_train) {
        throw ConfigError("steps per run below start_train; the agent would never update");
    }
    (void)design_space();
    (void)opf::make_benchmark(benchmark, scale);
}

nlohmann::json to_json(const StudyConfig& c) {
    return {{"benchmark", opf::benchmark_config_to_json(c.benchmark, c.scale)},
            {"trials", c.trials},
            {"seeds", c.seeds},
            {"steps", c.steps},
            {"seed", c.seed},
            {"workers", c.workers},
            {"dataset",
             {{"length", c.dataset_length},
              {"seed", c.dataset_seed},
              {"test_fraction", c.split.test_fraction},
              {"train_size", c.split.train_size},
              {"validation_size", c.split.validation_size},
              {"split_seed", c.split.split_seed}}},
            {"calibration_samples", c.calibration_samples},
            {"multi_step", c.multi_step},
            {"design_overrides", c.design_overrides},
            {"ddpg", rl::to_json(c.ddpg)},
            {"sampler", to_json(c.sampler)},
            {"baseline",
             {{"starts", c.baseline.starts},
              {"seed", c.baseline.seed},
              {"initial_step", c.baseline.initial_step},
              {"min_step", c.baseline.min_step},
              {"penalty_stages", c.baseline.penalty_stages}}}};
}

StudyConfig study_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("study config must be a JSON object");
    static const std::set<std::string> known = {"benchmark", "trials",   "seeds",    "steps",
                                                "seed",      "workers",  "dataset",  "calibration_samples",
                                                "multi_step", "design_overrides", "ddpg", "sampler",
                                                "baseline"};
    for (const auto& [k, v] : doc.items()) {
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
    StudyConfig c;
    try {
        if (doc.contains("benchmark")) {
            const auto& b = doc["benchmark"];
            if (b.is_string()) {
                c.benchmark = opf::benchmark_from_string(b.get<std::string>());
            } else {
                c.benchmark = opf::benchmark_from_string(b.at("kind").get<std::string>());
                c.scale.buses = b.value("buses", c.scale.buses);
                c.scale.actuators = b.value("actuators", c.scale.actuators);
                c.scale.meshed = b.value("meshed", c.scale.meshed);
            }
        }
        c.trials = doc.value("trials", c.trials);
        c.seeds = doc.value("seeds", c.seeds);
        c.steps = doc.value("steps", c.steps);
        c.seed = doc.value("seed", c.seed);
        c.workers = doc.value("workers", c.workers);
        if (doc.contains("dataset")) {
            const auto& d = doc["dataset"];
            c.dataset_length = d.value("length", c.dataset_length);
            c.dataset_seed = d.value("seed", c.dataset_seed);
            c.split.test_fraction = d.value("test_fraction", c.split.test_fraction);
            c.split.train_size = d.value("train_size", c.split.train_size);
            c.split.validation_size = d.value("validation_size", c.split.validation_size);
            c.split.split_seed = d.value("split_seed", c.split.split_seed);
        }
        c.calibration_samples = doc.value("calibration_samples", c.calibration_samples);
        c.multi_step = doc.value("multi_step", c.multi_step);
        if (doc.contains("design_overrides")) c.design_overrides = doc["design_overrides"];
        if (doc.contains("ddpg")) c.ddpg = rl::ddpg_config_from_json(doc["ddpg"]);
        if (doc.contains("sampler")) c.sampler = sampler_config_from_json(doc["sampler"]);
        if (doc.contains("baseline")) {
            const auto& b = doc["baseline"];
            c.baseline.starts = b.value("starts", c.baseline.starts);
            c.baseline.seed = b.value("seed", c.baseline.seed);
            c.baseline.initial_step = b.value("initial_step", c.baseline.initial_step);
            c.baseline.min_step = b.value("min_step", c.baseline.min_step);
            c.baseline.penalty_stages = b.value("penalty_stages", c.baseline.penalty_stages);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed study config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------

StudyContext make_context(const StudyConfig& config, const fs::path& cache_file, int threads) {
    config.validate();
    StudyContext ctx;
    ctx.config = config;
    ctx.space = config.design_space();
    auto problem = opf::make_benchmark(config.benchmark, config.scale);
    auto dataset = data::generate_timeseries(problem.timeseries_config(config.dataset_length), config.dataset_seed);
    auto splits = data::nested_split(dataset, config.split);
    ctx.data = env::make_env_data(std::move(problem), std::move(dataset), std::move(splits));
    opf::BaselineCache cache(cache_file);
    ctx.validation_baselines = std::make_shared<const std::vector<opf::BaselineSolution>>(
        kernels::baselines_for_split(*ctx.data, env::Mode::validation, config.baseline,
                                     cache_file.empty() ? nullptr : &cache, threads));
    return ctx;
}

std::uint64_t seed_for(std::uint64_t study_seed, std::size_t trial_id, std::size_t index) {
    return mix_seed(mix_seed(study_seed, trial_id), index);
}

RunOutcome train_design(std::shared_ptr<const env::EnvData> data, const env::EnvDesign& design,
                        const StudyConfig& config, std::size_t steps, std::uint64_t seed,
                        const rl::TrainOptions& extra) {
    RunOutcome out;
    std::mt19937_64 calib(mix_seed(seed, 0xCA1));
    out.stats = env::calibrate_normalization(design, *data, config.calibration_samples, calib);
    env::OpfEnv e(std::move(data), design, out.stats);
    rl::TrainOptions opts = extra;
    opts.steps = steps;
    opts.seed = seed;
    out.training = rl::train(e, config.ddpg, opts);
    out.resampled_states = e.resampled();
    return out;
}

TrialRecord run_trial(const StudyContext& ctx, const env::EnvDesign& design, std::size_t trial_id,
                      const std::vector<std::uint64_t>& seeds) {
    const auto start = std::chrono::steady_clock::now();
    ctx.space.validate(design);
    TrialRecord rec;
    rec.id = trial_id;
    rec.design = design;
    rec.checkpoint_fractions = ctx.config.ddpg.checkpoint_fractions;
    for (auto seed : seeds) {
        SeedResult sr;
        sr.seed = seed;
        try {
            const auto run = train_design(ctx.data, design, ctx.config, ctx.config.steps, seed);
            std::vector<metrics::EvalReport> reports;
            for (const auto& policy : run.training.checkpoints) {
                reports.push_back(metrics::evaluate_policy(policy, ctx.data, design, run.stats, env::Mode::validation,
                                                           *ctx.validation_baselines, 1));
                sr.checkpoints.push_back(reports.back().metrics);
            }
            sr.metrics = metrics::aggregate_checkpoints(reports);
            sr.resampled_states = run.resampled_states;
            sr.ok = true;
        } catch (const TrainingFailure& e) {
            sr.ok = false;
            sr.error = e.what();
        }
        rec.seeds.push_back(std::move(sr));
    }
    finalize(rec);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

// ---------------------------------------------------------------------------

StudyStore::StudyStore(fs::path dir, std::string name) : dir_(std::move(dir)), name_(std::move(name)) {}

bool StudyStore::has_config() const { return fs::exists(config_file()); }

StudyConfig StudyStore::load_config() const {
    std::ifstream in(config_file());
    if (!in) throw ConfigError("no study config in " + dir_.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed " + config_file().string() + ": " + e.what());
    }
    return study_config_from_json(doc);
}

namespace {

void write_atomic(const fs::path& file, const std::string& content) {
    auto tmp = file;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, file);
}

std::string read_all(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return {};
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

void StudyStore::save_config(const StudyConfig& c) const {
    fs::create_directories(dir_);
    write_atomic(config_file(), to_json(c).dump(2) + "\n");
}

std::vector<TrialRecord> StudyStore::load() const {
    std::vector<TrialRecord> out;
    std::ifstream in(trials_file());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(trial_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(trials_file().string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void StudyStore::append(const TrialRecord& r) const {
    fs::create_directories(dir_);
    write_atomic(trials_file(), read_all(trials_file()) + to_json(r).dump() + "\n");
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json comparable(const StudyConfig& c) {
    auto j = to_json(c);
    j.erase("workers");
    j.erase("trials");
    return j;
}

void check_dense(const std::vector<TrialRecord>& trials, const fs::path& file) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].id != i) {
            throw ConfigError(file.string() + ": trial ids are not dense (expected " + std::to_string(i) + ")");
        }
    }
}

/// Runs jobs [0, n) on `workers` threads; results are handed to `commit` in
/// index order as soon as the prefix is complete.
template <class Job, class Commit>
void run_ordered(std::size_t n, std::size_t workers, Job job, Commit commit) {
    std::vector<std::optional<TrialRecord>> done(n);
    std::mutex m;
    std::size_t next_commit = 0;
    std::atomic<std::size_t> next_job{0};
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next_job.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard lock(m);
                if (error) return;
            }
            try {
                auto rec = job(i);
                std::lock_guard lock(m);
                done[i] = std::move(rec);
                while (next_commit < n && done[next_commit]) {
                    commit(*done[next_commit]);
                    ++next_commit;
                }
            } catch (...) {
                std::lock_guard lock(m);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    if (workers <= 1 || n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(workers, n); ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

fs::path cache_path(const fs::path& dir, const StudyOptions& options) {
    return options.baseline_cache.value_or(dir / "baselines.json");
}

}  // namespace

Study run_study(const StudyConfig& config, const fs::path& dir, const StudyOptions& options) {
    config.validate();
    StudyStore store(dir);
    if (store.has_config()) {
        if (comparable(store.load_config()) != comparable(config)) {
            throw ConfigError("study in " + dir.string() + " was created with a different configuration");
        }
    }
    store.save_config(config);
    Study study{config, dir, store.load()};
    check_dense(study.trials, store.trials_file());
    if (study.trials.size() >= config.trials) {
        return study;
    }
    const auto ctx = make_context(config, cache_path(dir, options));
    const std::size_t g = config.sampler.generation_size;
    std::size_t budget = config.trials;
    if (options.max_new_trials) budget = std::min(budget, study.trials.size() + *options.max_new_trials);

    while (study.trials.size() < budget) {
        const std::size_t first = study.trials.size();
        const std::size_t end = std::min(budget, (first / g + 1) * g);
        std::vector<env::EnvDesign> designs;
        for (std::size_t id = first; id < end; ++id) {
            designs.push_back(propose_design(ctx.space, study.trials, id, config.seed, config.sampler));
        }
        run_ordered(
            end - first, config.workers,
            [&](std::size_t k) {
                const std::size_t id = first + k;
                std::vector<std::uint64_t> seeds;
                for (std::size_t s = 0; s < config.seeds; ++s) seeds.push_back(seed_for(config.seed, id, s));
                return run_trial(ctx, designs[k], id, seeds);
            },
            [&](const TrialRecord& rec) {
                store.append(rec);
                study.trials.push_back(rec);
                if (options.on_trial) options.on_trial(rec);
            });
    }
    return study;
}

Study load_study(const fs::path& dir) {
    StudyStore store(dir);
    Study study{store.load_config(), dir, store.load()};
    check_dense(study.trials, store.trials_file());
    return study;
}

std::vector<TrialRecord> run_baseline_sweep(const StudyConfig& config, const fs::path& dir, std::size_t seeds,
                                            const std::vector<double>& weights, const StudyOptions& options) {
    config.validate();
    if (seeds == 0) throw ConfigError("baseline sweep needs at least one seed");
    StudyStore store(dir, "baseline");
    if (store.has_config()) {
        if (comparable(store.load_config()) != comparable(config)) {
            throw ConfigError("baseline sweep in " + dir.string() + " belongs to a different configuration");
        }
    } else {
        store.save_config(config);
    }
    auto records = store.load();
    check_dense(records, store.trials_file());
    if (records.size() >= weights.size()) {
        records.resize(weights.size());
        return records;
    }
    auto ctx = make_context(config, cache_path(dir, options));
    // Baseline designs are evaluated even if overrides exclude them from the searched space.
    ctx.space = env::DesignSpace::standard(true);
    const std::uint64_t sweep_seed = mix_seed(config.seed, 0xBA5E);
    for (std::size_t i = records.size(); i < weights.size(); ++i) {
        const auto design = env::baseline_design(weights[i]);
        std::vector<std::uint64_t> s;
        for (std::size_t k = 0; k < seeds; ++k) s.push_back(seed_for(sweep_seed, i, k));
        auto rec = run_trial(ctx, design, i, s);
        rec.tag = "baseline";
        store.append(rec);
        records.push_back(rec);
        if (options.on_trial) options.on_trial(rec);
    }
    return records;
}

std::vector<double> hypervolume_history(const std::vector<TrialRecord>& trials) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& t : trials) {
        if (t.rankable()) worst = std::max(worst, *t.metrics.mean_error);
    }
    std::vector<double> out;
    std::vector<std::array<double, 2>> pts;
    const std::array<double, 2> ref{1.0, std::isfinite(worst) ? worst + 1e-6 * std::max(1.0, std::abs(worst)) : 0.0};
    for (const auto& t : trials) {
        if (t.rankable()) pts.push_back({*t.metrics.invalid_share, *t.metrics.mean_error});
        out.push_back(hypervolume_2d(pts, ref));
    }
    return out;
}

}  // namespace autoenv::hpo

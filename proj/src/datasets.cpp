#include "autoenv/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>

#include "autoenv/errors.hpp"

namespace autoenv::data {

const char* to_string(Archetype a) {
    switch (a) {
    case Archetype::load: return "load";
    case Archetype::solar: return "solar";
    case Archetype::wind: return "wind";
    }
    return "unknown";
}

Archetype archetype_from_string(const std::string& s) {
    if (s == "load") return Archetype::load;
    if (s == "solar") return Archetype::solar;
    if (s == "wind") return Archetype::wind;
    throw ConfigError("unknown archetype '" + s + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double hour_of(const TimeseriesConfig& c, std::size_t t) {
    const auto spd = static_cast<std::size_t>(c.steps_per_day);
    return 24.0 * static_cast<double>(t % spd) / static_cast<double>(spd);
}

double day_of(const TimeseriesConfig& c, std::size_t t) {
    return static_cast<double>(t / static_cast<std::size_t>(c.steps_per_day));
}

}  // namespace

bool is_night(const TimeseriesConfig& c, std::size_t t) {
    const double h = hour_of(c, t);
    return h >= c.night_start_hour || h < c.night_end_hour;
}

double profile(const TimeseriesConfig& c, Archetype archetype, std::size_t unit, std::size_t t) {
    const double h = hour_of(c, t);
    const double d = day_of(c, t);
    const double phase = 0.7 * static_cast<double>(unit);
    switch (archetype) {
    case Archetype::load: {
        const double daily = 0.6 + 0.3 * std::sin(kTwoPi * (h - 13.0) / 24.0);
        const double weekly = 0.9 + 0.1 * std::sin(kTwoPi * d / 7.0 + phase);
        return daily * weekly;
    }
    case Archetype::solar: {
        if (is_night(c, t)) {
            return 0.0;
        }
        const double span = c.night_start_hour - c.night_end_hour;
        const double daily = std::sin(std::numbers::pi * (h - c.night_end_hour) / span);
        const double weekly = 0.75 + 0.25 * std::sin(kTwoPi * d / 7.0 + phase);
        return daily * weekly;
    }
    case Archetype::wind: {
        const double daily = 0.55 + 0.25 * std::sin(kTwoPi * h / 24.0 + phase);
        const double weekly = 0.65 + 0.35 * std::sin(kTwoPi * d / 5.0 + 2.0 * phase);
        return daily * weekly;
    }
    }
    return 0.0;
}

Dataset generate_timeseries(const TimeseriesConfig& config, std::uint64_t seed) {
    if (config.length == 0 || config.steps_per_day <= 0) {
        throw ConfigError("time series needs positive length and steps_per_day");
    }
    if (config.noise < 0.0) {
        throw ConfigError("noise amplitude must be nonnegative");
    }
    Dataset ds;
    ds.config = config;
    ds.seed = seed;
    const std::size_t units = config.unit_archetypes.size();
    ds.scalers.resize(config.length * units);
    ds.prices.resize(config.length * config.price_channels);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t t = 0; t < config.length; ++t) {
        for (std::size_t u = 0; u < units; ++u) {
            const Archetype a = config.unit_archetypes[u];
            double value = profile(config, a, u, t);
            // Draw regardless of branch so the stream position is schedule-independent.
            const double eps = noise(rng);
            if (!(a == Archetype::solar && is_night(config, t))) {
                value += config.noise * eps;
            }
            ds.scalers[t * units + u] = std::clamp(value, 0.0, 1.0);
        }
        for (std::size_t c = 0; c < config.price_channels; ++c) {
            ds.prices[t * config.price_channels + c] = uniform(rng);
        }
    }
    return ds;
}

Splits nested_split(const Dataset& dataset, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
        throw ConfigError("test_fraction must lie in (0, 1)");
    }
    const std::size_t n = dataset.length();
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    const std::size_t n_rest = n - n_test;
    if (spec.train_size + spec.validation_size > n_rest) {
        throw ConfigError("requested train+validation sizes (" + std::to_string(spec.train_size) + "+" +
                          std::to_string(spec.validation_size) + ") exceed the " + std::to_string(n_rest) +
                          " non-test rows");
    }
    Splits s;
    s.test.resize(n_test);
    std::iota(s.test.begin(), s.test.end(), n_rest);

    std::vector<std::size_t> rest(n_rest);
    std::iota(rest.begin(), rest.end(), std::size_t{0});
    std::mt19937_64 rng(spec.split_seed);
    std::shuffle(rest.begin(), rest.end(), rng);
    s.validation.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(spec.validation_size));
    s.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(spec.validation_size),
                   rest.begin() + static_cast<std::ptrdiff_t>(spec.validation_size + spec.train_size));
    return s;
}

nlohmann::json config_to_json(const TimeseriesConfig& c) {
    nlohmann::json archetypes = nlohmann::json::array();
    for (auto a : c.unit_archetypes) {
        archetypes.push_back(to_string(a));
    }
    return {{"length", c.length},
            {"steps_per_day", c.steps_per_day},
            {"night_start_hour", c.night_start_hour},
            {"night_end_hour", c.night_end_hour},
            {"noise", c.noise},
            {"archetypes", archetypes},
            {"price_channels", c.price_channels}};
}

TimeseriesConfig config_from_json(const nlohmann::json& doc) {
    TimeseriesConfig c;
    try {
        c.length = doc.value("length", c.length);
        c.steps_per_day = doc.value("steps_per_day", c.steps_per_day);
        c.night_start_hour = doc.value("night_start_hour", c.night_start_hour);
        c.night_end_hour = doc.value("night_end_hour", c.night_end_hour);
        c.noise = doc.value("noise", c.noise);
        c.price_channels = doc.value("price_channels", c.price_channels);
        for (const auto& a : doc.value("archetypes", nlohmann::json::array())) {
            c.unit_archetypes.push_back(archetype_from_string(a.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed time series config: ") + e.what());
    }
    return c;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& csv_path) {
    std::ofstream csv(csv_path);
    if (!csv) {
        throw ConfigError("cannot write " + csv_path.string());
    }
    csv << "t";
    for (std::size_t u = 0; u < ds.unit_count(); ++u) {
        csv << ",unit" << u;
    }
    for (std::size_t c = 0; c < ds.price_count(); ++c) {
        csv << ",price" << c;
    }
    csv << '\n' << std::setprecision(17);
    for (std::size_t t = 0; t < ds.length(); ++t) {
        csv << t;
        for (double v : ds.unit_row(t)) {
            csv << ',' << v;
        }
        for (double v : ds.price_row(t)) {
            csv << ',' << v;
        }
        csv << '\n';
    }
    auto sidecar = csv_path;
    sidecar.replace_extension(".json");
    std::ofstream js(sidecar);
    js << nlohmann::json{{"seed", ds.seed}, {"config", config_to_json(ds.config)}}.dump(2) << '\n';
}

Dataset regenerate_from_sidecar(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) {
        throw ConfigError("cannot open " + json_path.string());
    }
    nlohmann::json doc;
    in >> doc;
    return generate_timeseries(config_from_json(doc.at("config")), doc.at("seed").get<std::uint64_t>());
}

}  // namespace autoenv::data

#pragma once

// Deterministic synthetic time series and nested resampling splits.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace autoenv::data {

enum class Archetype { load, solar, wind };

[[nodiscard]] const char* to_string(Archetype a);
[[nodiscard]] Archetype archetype_from_string(const std::string& s);

struct TimeseriesConfig {
    std::size_t length = 4000;
    int steps_per_day = 24;
    /// Hours in [night_start, 24) and [0, night_end) carry zero solar feed-in.
    double night_start_hour = 18.0;
    double night_end_hour = 6.0;
    double noise = 0.05;
    std::vector<Archetype> unit_archetypes;
    std::size_t price_channels = 0;
};

/// Row-major T x U matrix of unit scalers in [0, 1] plus T x C price scalers.
struct Dataset {
    TimeseriesConfig config;
    std::uint64_t seed = 0;
    std::vector<double> scalers;
    std::vector<double> prices;

    [[nodiscard]] std::size_t length() const { return config.length; }
    [[nodiscard]] std::size_t unit_count() const { return config.unit_archetypes.size(); }
    [[nodiscard]] std::size_t price_count() const { return config.price_channels; }
    [[nodiscard]] std::span<const double> unit_row(std::size_t t) const {
        return {scalers.data() + t * unit_count(), unit_count()};
    }
    [[nodiscard]] std::span<const double> price_row(std::size_t t) const {
        return {prices.data() + t * price_count(), price_count()};
    }
};

/// Noise-free profile value of one unit at one timestep.
[[nodiscard]] double profile(const TimeseriesConfig& config, Archetype archetype, std::size_t unit, std::size_t t);
[[nodiscard]] bool is_night(const TimeseriesConfig& config, std::size_t t);

/// daily x weekly sinusoid per archetype, plus seeded Gaussian noise, clamped
/// to [0, 1]. Solar units are exactly zero at night.
[[nodiscard]] Dataset generate_timeseries(const TimeseriesConfig& config, std::uint64_t seed);

struct SplitSpec {
    double test_fraction = 0.2;
    std::size_t train_size = 800;
    std::size_t validation_size = 200;
    std::uint64_t split_seed = 0;
};

/// Row indices into a Dataset.
struct Splits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Temporal tail -> test; the rest shuffled by split_seed into train and
/// validation. Throws ConfigError if sizes exceed the available rows.
[[nodiscard]] Splits nested_split(const Dataset& dataset, const SplitSpec& spec);

[[nodiscard]] nlohmann::json config_to_json(const TimeseriesConfig& config);
[[nodiscard]] TimeseriesConfig config_from_json(const nlohmann::json& doc);

/// Writes <stem>.csv (timestep x column) and <stem>.json (seed, config).
void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path);
/// Regenerates the dataset from a JSON sidecar.
[[nodiscard]] Dataset regenerate_from_sidecar(const std::filesystem::path& json_path);

}  // namespace autoenv::data

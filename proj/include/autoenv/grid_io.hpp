#pragma once

#include <filesystem>

#include <json.hpp>

#include "autoenv/grid.hpp"

namespace autoenv::grid {

inline constexpr int kGridFormatVersion = 1;

/// Contents of a grid definition file.
struct GridDefinition {
    Grid grid;
    ConstraintLimits limits;
};

[[nodiscard]] nlohmann::json to_json(const GridDefinition& def);
/// Throws ConfigError on a missing or unsupported format_version, on malformed
/// fields, and on any grid that fails validate().
[[nodiscard]] GridDefinition grid_from_json(const nlohmann::json& doc);

[[nodiscard]] GridDefinition load_grid(const std::filesystem::path& path);
void save_grid(const GridDefinition& def, const std::filesystem::path& path);

[[nodiscard]] const char* to_string(UnitKind kind);
[[nodiscard]] UnitKind unit_kind_from_string(const std::string& s);

}  // namespace autoenv::grid

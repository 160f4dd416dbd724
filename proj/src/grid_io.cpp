#include "autoenv/grid_io.hpp"

#include <fstream>

#include "autoenv/errors.hpp"

namespace autoenv::grid {

using nlohmann::json;

const char* to_string(UnitKind kind) {
    switch (kind) {
    case UnitKind::generator: return "generator";
    case UnitKind::load: return "load";
    case UnitKind::storage: return "storage";
    }
    return "unknown";
}

UnitKind unit_kind_from_string(const std::string& s) {
    if (s == "generator") return UnitKind::generator;
    if (s == "load") return UnitKind::load;
    if (s == "storage") return UnitKind::storage;
    throw ConfigError("unknown unit kind '" + s + "'");
}

json to_json(const GridDefinition& def) {
    const Grid& g = def.grid;
    json doc;
    doc["format_version"] = kGridFormatVersion;
    doc["base_mva"] = g.base_mva;
    doc["buses"] = json::array();
    for (const auto& b : g.buses) {
        doc["buses"].push_back({{"name", b.name}, {"slack", b.slack}});
    }
    doc["lines"] = json::array();
    for (const auto& l : g.lines) {
        doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"r", l.r}, {"x", l.x}, {"b", l.b}, {"s_max_mva", l.s_max_mva}});
    }
    doc["transformers"] = json::array();
    for (const auto& t : g.transformers) {
        doc["transformers"].push_back({{"hv_bus", t.hv_bus}, {"lv_bus", t.lv_bus}, {"r", t.r}, {"x", t.x},
                                       {"tap", t.tap}, {"s_max_mva", t.s_max_mva}});
    }
    doc["units"] = json::array();
    for (const auto& u : g.units) {
        doc["units"].push_back({{"name", u.name},
                                {"bus", u.bus},
                                {"kind", to_string(u.kind)},
                                {"p_min_mw", u.p_min_nom},
                                {"p_max_mw", u.p_max_nom},
                                {"q_min_mvar", u.q_min_nom},
                                {"q_max_mvar", u.q_max_nom},
                                {"controllable", u.controllable},
                                {"renewable", u.renewable}});
    }
    const auto& l = def.limits;
    doc["limits"] = {{"v_min_pu", l.v_min},
                     {"v_max_pu", l.v_max},
                     {"max_line_loading", l.max_line_loading},
                     {"max_trafo_loading", l.max_trafo_loading},
                     {"slack_p_min_mw", l.slack_p_min_mw},
                     {"slack_p_max_mw", l.slack_p_max_mw},
                     {"slack_q_min_mvar", l.slack_q_min_mvar},
                     {"slack_q_max_mvar", l.slack_q_max_mvar}};
    return doc;
}

GridDefinition grid_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("format_version")) {
        throw ConfigError("grid definition lacks format_version");
    }
    if (doc.at("format_version").get<int>() != kGridFormatVersion) {
        throw ConfigError("unsupported grid format_version " + doc.at("format_version").dump());
    }
    GridDefinition def;
    try {
        Grid& g = def.grid;
        g.base_mva = doc.at("base_mva").get<double>();
        for (const auto& b : doc.at("buses")) {
            g.buses.push_back({b.value("name", std::string{}), b.value("slack", false)});
        }
        for (const auto& l : doc.value("lines", json::array())) {
            g.lines.push_back({l.at("from").get<int>(), l.at("to").get<int>(), l.at("r").get<double>(),
                               l.at("x").get<double>(), l.value("b", 0.0), l.at("s_max_mva").get<double>()});
        }
        for (const auto& t : doc.value("transformers", json::array())) {
            g.transformers.push_back({t.at("hv_bus").get<int>(), t.at("lv_bus").get<int>(), t.at("r").get<double>(),
                                      t.at("x").get<double>(), t.value("tap", 1.0), t.at("s_max_mva").get<double>()});
        }
        for (const auto& u : doc.value("units", json::array())) {
            Unit unit;
            unit.name = u.value("name", std::string{});
            unit.bus = u.at("bus").get<int>();
            unit.kind = unit_kind_from_string(u.at("kind").get<std::string>());
            unit.p_min_nom = u.at("p_min_mw").get<double>();
            unit.p_max_nom = u.at("p_max_mw").get<double>();
            unit.q_min_nom = u.value("q_min_mvar", 0.0);
            unit.q_max_nom = u.value("q_max_mvar", 0.0);
            unit.controllable = u.value("controllable", false);
            unit.renewable = u.value("renewable", false);
            g.units.push_back(unit);
        }
        if (doc.contains("limits")) {
            const auto& l = doc.at("limits");
            ConstraintLimits& c = def.limits;
            c.v_min = l.value("v_min_pu", c.v_min);
            c.v_max = l.value("v_max_pu", c.v_max);
            c.max_line_loading = l.value("max_line_loading", c.max_line_loading);
            c.max_trafo_loading = l.value("max_trafo_loading", c.max_trafo_loading);
            c.slack_p_min_mw = l.value("slack_p_min_mw", c.slack_p_min_mw);
            c.slack_p_max_mw = l.value("slack_p_max_mw", c.slack_p_max_mw);
            c.slack_q_min_mvar = l.value("slack_q_min_mvar", c.slack_q_min_mvar);
            c.slack_q_max_mvar = l.value("slack_q_max_mvar", c.slack_q_max_mvar);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed grid definition: ") + e.what());
    }
    validate(def.grid);
    return def;
}

GridDefinition load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open grid file " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("grid file " + path.string() + " is not valid JSON: " + e.what());
    }
    return grid_from_json(doc);
}

void save_grid(const GridDefinition& def, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write grid file " + path.string());
    }
    out << to_json(def).dump(2) << '\n';
}

}  // namespace autoenv::grid

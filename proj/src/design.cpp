#include "autoenv/design.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "autoenv/errors.hpp"

namespace autoenv::env {

namespace {

using Member = std::variant<double EnvDesign::*, bool EnvDesign::*, int EnvDesign::*>;

struct Field {
    const char* name;
    Member member;
};

const Field kFields[] = {
    {"valid_reward", &EnvDesign::valid_reward},
    {"invalid_penalty", &EnvDesign::invalid_penalty},
    {"invalid_objective_share", &EnvDesign::invalid_objective_share},
    {"penalty_weight", &EnvDesign::penalty_weight},
    {"diff_objective", &EnvDesign::diff_objective},
    {"normal_data", &EnvDesign::normal_data},
    {"uniform_data", &EnvDesign::uniform_data},
    {"realistic_data", &EnvDesign::realistic_data},
    {"add_voltage_magnitude", &EnvDesign::add_voltage_magnitude},
    {"add_voltage_angle", &EnvDesign::add_voltage_angle},
    {"add_line_loading", &EnvDesign::add_line_loading},
    {"add_trafo_loading", &EnvDesign::add_trafo_loading},
    {"add_slack_power", &EnvDesign::add_slack_power},
    {"steps_per_episode", &EnvDesign::steps_per_episode},
    {"autoscaling", &EnvDesign::autoscaling},
};

const Field& field(std::string_view name) {
    for (const auto& f : kFields) {
        if (name == f.name) return f;
    }
    throw ConfigError("unknown design variable '" + std::string(name) + "'");
}

bool is_share(std::string_view name) {
    return std::any_of(std::begin(kShareNames), std::end(kShareNames), [&](const char* s) { return name == s; });
}

VariableSpec real_var(const char* name, double lo, double hi) { return {name, VarType::real, lo, hi, {}}; }
VariableSpec bool_var(const char* name) { return {name, VarType::boolean, 0.0, 1.0, {}}; }

}  // namespace

double get_value(const EnvDesign& d, std::string_view name) {
    return std::visit(
        [&](auto m) -> double {
            return static_cast<double>(d.*m);
        },
        field(name).member);
}

void set_value(EnvDesign& d, std::string_view name, double value) {
    std::visit(
        [&](auto m) {
            using T = std::remove_reference_t<decltype(d.*m)>;
            if constexpr (std::is_same_v<T, bool>) {
                d.*m = value >= 0.5;
            } else if constexpr (std::is_same_v<T, int>) {
                d.*m = static_cast<int>(std::lround(value));
            } else {
                d.*m = value;
            }
        },
        field(name).member);
}

void project_onto_capped_simplex(std::span<double> v, std::span<const double> lo, std::span<const double> hi) {
    double slo = 0.0;
    double shi = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        slo += lo[i];
        shi += hi[i];
    }
    if (slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12) {
        throw ConfigError("data share bounds admit no point summing to one");
    }
    auto total = [&](double tau) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s += std::clamp(v[i] - tau, lo[i], hi[i]);
        return s;
    };
    // total(tau) is non-increasing in tau; bracket and bisect.
    double a = *std::min_element(v.begin(), v.end()) - 2.0;
    double b = *std::max_element(v.begin(), v.end()) + 2.0;
    for (int it = 0; it < 200 && b - a > 1e-16; ++it) {
        const double m = 0.5 * (a + b);
        (total(m) > 1.0 ? a : b) = m;
    }
    const double tau = 0.5 * (a + b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i] - tau, lo[i], hi[i]);
    // Push the rounding residue into a coordinate with slack.
    double resid = 1.0;
    for (double x : v) resid -= x;
    for (std::size_t i = 0; i < v.size() && resid != 0.0; ++i) {
        const double moved = std::clamp(v[i] + resid, lo[i], hi[i]);
        resid -= moved - v[i];
        v[i] = moved;
    }
}

void project_shares(EnvDesign& d) {
    double v[3] = {d.normal_data, d.uniform_data, d.realistic_data};
    const double lo[3] = {0.0, 0.0, 0.0};
    const double hi[3] = {1.0, 1.0, 1.0};
    project_onto_capped_simplex(v, lo, hi);
    d.normal_data = v[0];
    d.uniform_data = v[1];
    d.realistic_data = v[2];
}

EnvDesign baseline_design(double penalty_weight) {
    EnvDesign d;
    d.penalty_weight = penalty_weight;
    return d;
}

// ---------------------------------------------------------------------------

DesignSpace DesignSpace::standard(bool multi_step) {
    DesignSpace s;
    s.vars_ = {
        real_var("valid_reward", 0.0, 2.0),
        real_var("invalid_penalty", 0.0, 2.0),
        real_var("invalid_objective_share", 0.0, 1.0),
        real_var("penalty_weight", 0.01, 0.99),
        bool_var("diff_objective"),
        real_var("normal_data", 0.0, 1.0),
        real_var("uniform_data", 0.0, 1.0),
        real_var("realistic_data", 0.0, 1.0),
        bool_var("add_voltage_magnitude"),
        bool_var("add_voltage_angle"),
        bool_var("add_line_loading"),
        bool_var("add_trafo_loading"),
        bool_var("add_slack_power"),
        {"steps_per_episode", VarType::integer, 1.0, multi_step ? 5.0 : 1.0,
         multi_step ? std::vector<int>{1, 3, 5} : std::vector<int>{1}},
        bool_var("autoscaling"),
    };
    return s;
}

const VariableSpec& DesignSpace::at(std::string_view name) const {
    for (const auto& v : vars_) {
        if (v.name == name) return v;
    }
    throw ConfigError("unknown design variable '" + std::string(name) + "'");
}

void DesignSpace::apply_overrides(const nlohmann::json& overrides) {
    if (!overrides.is_object()) {
        throw ConfigError("design space overrides must be a JSON object");
    }
    const DesignSpace full = standard(true);
    for (const auto& [name, spec] : overrides.items()) {
        auto it = std::find_if(vars_.begin(), vars_.end(), [&](const VariableSpec& v) { return v.name == name; });
        if (it == vars_.end()) {
            throw ConfigError("unknown design variable '" + name + "'");
        }
        const VariableSpec& outer = full.at(name);
        VariableSpec& var = *it;
        try {
            if (spec.contains("fixed")) {
                const double v = spec["fixed"].is_boolean() ? (spec["fixed"].get<bool>() ? 1.0 : 0.0)
                                                            : spec["fixed"].get<double>();
                var.low = var.high = v;
                if (var.type == VarType::integer) var.choices = {static_cast<int>(std::lround(v))};
            }
            if (spec.contains("low")) var.low = spec["low"].get<double>();
            if (spec.contains("high")) var.high = spec["high"].get<double>();
            if (spec.contains("choices")) {
                if (var.type != VarType::integer) {
                    throw ConfigError("'choices' only applies to integer variable, not '" + name + "'");
                }
                var.choices = spec["choices"].get<std::vector<int>>();
                if (var.choices.empty()) throw ConfigError("empty choices for '" + name + "'");
                var.low = *std::min_element(var.choices.begin(), var.choices.end());
                var.high = *std::max_element(var.choices.begin(), var.choices.end());
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad override for '" + name + "': " + e.what());
        }
        if (var.low > var.high || var.low < outer.low || var.high > outer.high) {
            throw ConfigError("override for '" + name + "' leaves the admissible range");
        }
        if (var.type == VarType::integer) {
            for (int c : var.choices) {
                if (std::find(outer.choices.begin(), outer.choices.end(), c) == outer.choices.end()) {
                    throw ConfigError("choice " + std::to_string(c) + " not admissible for '" + name + "'");
                }
            }
        }
    }
    double slo = 0.0;
    double shi = 0.0;
    for (const char* s : kShareNames) {
        slo += at(s).low;
        shi += at(s).high;
    }
    if (slo > 1.0 + 1e-9 || shi < 1.0 - 1e-9) {
        throw ConfigError("data share ranges admit no mixture summing to one");
    }
}

bool DesignSpace::contains(const EnvDesign& design) const {
    for (const auto& var : vars_) {
        const double v = get_value(design, var.name);
        if (var.type == VarType::integer) {
            if (std::find(var.choices.begin(), var.choices.end(), static_cast<int>(v)) == var.choices.end()) {
                return false;
            }
        } else if (!(v >= var.low - 1e-12 && v <= var.high + 1e-12)) {
            return false;
        }
    }
    const double sum = design.normal_data + design.uniform_data + design.realistic_data;
    return std::abs(sum - 1.0) <= 1e-9;
}

void DesignSpace::validate(const EnvDesign& design) const {
    if (!contains(design)) {
        throw ConfigError("environment design outside the design space: " + env::to_json(design).dump());
    }
}

void DesignSpace::repair(EnvDesign& design) const {
    for (const auto& var : vars_) {
        if (is_share(var.name)) continue;
        double v = get_value(design, var.name);
        if (var.type == VarType::integer) {
            int best = var.choices.front();
            for (int c : var.choices) {
                if (std::abs(c - v) < std::abs(best - v)) best = c;
            }
            v = best;
        } else {
            v = std::clamp(v, var.low, var.high);
        }
        set_value(design, var.name, v);
    }
    double v[3];
    double lo[3];
    double hi[3];
    for (int i = 0; i < 3; ++i) {
        v[i] = get_value(design, kShareNames[i]);
        lo[i] = at(kShareNames[i]).low;
        hi[i] = at(kShareNames[i]).high;
    }
    // Feasible shares are left bit-for-bit untouched so repair is idempotent.
    bool feasible = std::abs(v[0] + v[1] + v[2] - 1.0) <= 1e-12;
    for (int i = 0; i < 3; ++i) feasible = feasible && v[i] >= lo[i] && v[i] <= hi[i];
    if (feasible) return;
    project_onto_capped_simplex(v, lo, hi);
    for (int i = 0; i < 3; ++i) set_value(design, kShareNames[i], v[i]);
}

EnvDesign DesignSpace::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    EnvDesign d;
    for (const auto& var : vars_) {
        if (is_share(var.name)) continue;
        double v = 0.0;
        switch (var.type) {
            case VarType::real:
                v = var.low + (var.high - var.low) * unif(rng);
                break;
            case VarType::boolean:
                v = var.low == var.high ? var.low : (unif(rng) < 0.5 ? 0.0 : 1.0);
                break;
            case VarType::integer:
                v = var.choices[std::uniform_int_distribution<std::size_t>(0, var.choices.size() - 1)(rng)];
                break;
        }
        set_value(d, var.name, v);
    }
    // Uniform on the simplex (Dirichlet(1,1,1)), rejected against narrowed bounds.
    std::exponential_distribution<double> expo(1.0);
    double shares[3] = {0.0, 0.0, 1.0};
    for (int attempt = 0; attempt < 1000; ++attempt) {
        double e[3] = {expo(rng), expo(rng), expo(rng)};
        const double s = e[0] + e[1] + e[2];
        bool ok = true;
        for (int i = 0; i < 3; ++i) {
            shares[i] = e[i] / s;
            const auto& var = at(kShareNames[i]);
            ok = ok && shares[i] >= var.low && shares[i] <= var.high;
        }
        if (ok) break;
    }
    for (int i = 0; i < 3; ++i) set_value(d, kShareNames[i], shares[i]);
    repair(d);
    return d;
}

nlohmann::json DesignSpace::to_json() const {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& var : vars_) {
        nlohmann::json v;
        v["type"] = var.type == VarType::real ? "float" : var.type == VarType::boolean ? "boolean" : "integer";
        if (var.type == VarType::integer) {
            v["choices"] = var.choices;
        } else {
            v["low"] = var.low;
            v["high"] = var.high;
        }
        doc[var.name] = v;
    }
    return doc;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const EnvDesign& d) {
    nlohmann::json doc = nlohmann::json::object();
    for (const auto& f : kFields) {
        std::visit([&](auto m) { doc[f.name] = d.*m; }, f.member);
    }
    return doc;
}

EnvDesign design_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw ConfigError("environment design must be a JSON object");
    }
    EnvDesign d;
    for (const auto& [key, value] : doc.items()) {
        const Field& f = field(key);
        try {
            std::visit(
                [&](auto m) {
                    using T = std::remove_reference_t<decltype(d.*m)>;
                    if constexpr (std::is_same_v<T, bool>) {
                        d.*m = value.get<bool>();
                    } else if constexpr (std::is_same_v<T, int>) {
                        if (!value.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
                        d.*m = value.get<int>();
                    } else {
                        d.*m = value.get<double>();
                    }
                },
                f.member);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad value for '" + key + "': " + e.what());
        }
    }
    return d;
}

}  // namespace autoenv::env

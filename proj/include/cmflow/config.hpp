#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmflow/errors.hpp"

namespace cmflow {

enum class Experiment { Toy, Moving, Curve, Surface, Convergence };

inline const char* experiment_name(Experiment e)
{
    switch (e) {
    case Experiment::Toy: return "toy_redistribution";
    case Experiment::Moving: return "moving_density";
    case Experiment::Curve: return "curve_advection";
    case Experiment::Surface: return "surface_advection";
    case Experiment::Convergence: return "convergence_study";
    }
    return "";
}

namespace config_detail {

enum class Type { Real, Integer, Word, Text, Reals, Integers, Words, Vec3, Flag };
enum class Rule { Any, Positive, NonNegative, Order };

struct Key {
    const char* name;
    Type type;
    Rule rule;
};

// clang-format off
inline constexpr Key kKeys[] = {
    {"experiment", Type::Word, Rule::Any},
    {"preset", Type::Word, Rule::Any},
    {"output_dir", Type::Text, Rule::Any},
    {"seed", Type::Integer, Rule::NonNegative},
    {"order", Type::Integer, Rule::Order},
    {"T", Type::Real, Rule::Positive},
    {"heat_remap", Type::Real, Rule::Positive},
    {"min_density", Type::Real, Rule::Positive},
    {"amplitude", Type::Real, Rule::NonNegative},
    {"mesh_cells", Type::Integer, Rule::Positive},
    // toy redistribution
    {"toy_sizes", Type::Integers, Rule::Positive},
    {"dt_scale", Type::Real, Rule::Positive},
    // moving density
    {"moving_sizes", Type::Integers, Rule::Positive},
    {"nu_list", Type::Reals, Rule::Positive},
    {"dt_ratio", Type::Real, Rule::Positive},
    {"inner_steps", Type::Integer, Rule::NonNegative},
    // curve and surface advection
    {"velocity", Type::Word, Rule::Any},
    {"period", Type::Real, Rule::Positive},
    {"charts", Type::Words, Rule::Any},
    {"ambient_cells", Type::Integer, Rule::Positive},
    {"ambient_dt", Type::Real, Rule::Positive},
    {"ambient_order", Type::Integer, Rule::Order},
    {"ambient_remap", Type::Real, Rule::Positive},
    {"rk_substeps", Type::Integer, Rule::Positive},
    {"archive_submaps", Type::Flag, Rule::Any},
    {"nu", Type::Real, Rule::Positive},
    {"redist_cells", Type::Integer, Rule::Positive},
    {"stat_cells", Type::Integer, Rule::Positive},
    {"curve_stat_cells", Type::Integer, Rule::Positive},
    {"output_times", Type::Reals, Rule::NonNegative},
    {"samples", Type::Integer, Rule::Positive},
    {"custom_kind", Type::Word, Rule::Any},
    {"custom_name", Type::Word, Rule::Any},
    {"custom_origin", Type::Vec3, Rule::Any},
    {"custom_end", Type::Vec3, Rule::Any},
    {"custom_e1", Type::Vec3, Rule::Any},
    {"custom_e2", Type::Vec3, Rule::Any},
    {"custom_axis", Type::Vec3, Rule::Any},
    {"custom_radius", Type::Real, Rule::Positive},
    {"custom_minor", Type::Real, Rule::Positive},
    {"custom_height", Type::Real, Rule::Positive},
    // convergence study
    {"interp_sizes", Type::Integers, Rule::Positive},
    {"conv_sizes", Type::Integers, Rule::Positive},
    {"conv_T", Type::Real, Rule::Positive},
    {"conv_dt", Type::Real, Rule::Positive},
    {"conv_time_cells", Type::Integer, Rule::Positive},
    {"conv_time_steps", Type::Integers, Rule::Positive},
};
// clang-format on

inline const Key* find_key(std::string_view name)
{
    for (const Key& k : kKeys) {
        if (name == k.name) return &k;
    }
    return nullptr;
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

/// A real number, `inf`, or a fraction `p/q`.
inline bool parse_real(const std::string& s, double& v)
{
    if (s == "inf") {
        v = std::numeric_limits<double>::infinity();
        return true;
    }
    if (const auto slash = s.find('/'); slash != std::string::npos) {
        double a = 0.0, b = 0.0;
        if (!parse_real(trim(s.substr(0, slash)), a) || !parse_real(trim(s.substr(slash + 1)), b) || b == 0.0) {
            return false;
        }
        v = a / b;
        return std::isfinite(v);
    }
    const char* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    return r.ec == std::errc{} && r.ptr == end && !std::isnan(v);
}

inline bool parse_int(const std::string& s, long& v)
{
    const char* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    return r.ec == std::errc{} && r.ptr == end;
}

inline bool parse_flag(const std::string& s, bool& v)
{
    if (s == "true" || s == "yes" || s == "1") {
        v = true;
        return true;
    }
    if (s == "false" || s == "no" || s == "0") {
        v = false;
        return true;
    }
    return false;
}

inline void check_number(const Key& k, double v)
{
    const std::string name = k.name;
    switch (k.rule) {
    case Rule::Positive:
        if (!(v > 0.0)) throw ConfigError("'" + name + "' must be positive");
        break;
    case Rule::NonNegative:
        if (!(v >= 0.0)) throw ConfigError("'" + name + "' must be non-negative");
        break;
    case Rule::Order:
        if (v != 0.0 && v != 1.0) throw ConfigError("'" + name + "' must be 0 or 1");
        break;
    case Rule::Any:
        break;
    }
}

/// Throws ConfigError unless `value` is well-formed for `k`.
inline void validate(const Key& k, const std::string& value)
{
    const std::string name = k.name;
    auto bad = [&](const char* what) { return ConfigError("'" + name + "' expects " + what + ", got '" + value + "'"); };
    if (value.empty() && k.type != Type::Text) throw ConfigError("'" + name + "' has no value");
    switch (k.type) {
    case Type::Real: {
        double v = 0.0;
        if (!parse_real(value, v)) throw bad("a number");
        check_number(k, v);
        break;
    }
    case Type::Integer: {
        long v = 0;
        if (!parse_int(value, v)) throw bad("an integer");
        check_number(k, static_cast<double>(v));
        break;
    }
    case Type::Reals:
    case Type::Vec3: {
        const auto items = split(value);
        if (k.type == Type::Vec3 && items.size() != 3) throw bad("three comma-separated numbers");
        for (const auto& it : items) {
            double v = 0.0;
            if (!parse_real(it, v)) throw bad("comma-separated numbers");
            check_number(k, v);
        }
        break;
    }
    case Type::Integers:
        for (const auto& it : split(value)) {
            long v = 0;
            if (!parse_int(it, v)) throw bad("comma-separated integers");
            check_number(k, static_cast<double>(v));
        }
        break;
    case Type::Words:
        for (const auto& it : split(value)) {
            if (it.empty()) throw bad("comma-separated names");
        }
        break;
    case Type::Flag: {
        bool v = false;
        if (!parse_flag(value, v)) throw bad("true or false");
        break;
    }
    case Type::Word:
        if (value.find_first_of(" \t,") != std::string::npos) throw bad("a single word");
        break;
    case Type::Text:
        break;
    }
}

} // namespace config_detail

/**
 * Flat experiment configuration: `key = value` lines, `#` comments. Values
 * are validated when set; lists are comma separated and reals accept `p/q`
 * and `inf`. Defaults are the desk preset for the experiment.
 */
class Config {
public:
    explicit Config(Experiment e) : experiment_(e)
    {
        set("experiment", experiment_name(e));
        set("output_dir", "cmflow_out");
        set("seed", "2024");
        set("order", "0");
        set("heat_remap", "inf");
        set("min_density", "1e-8");
        set("mesh_cells", "32");
        switch (e) {
        case Experiment::Toy:
            set("toy_sizes", "64,128,256");
            set("T", "1");
            set("dt_scale", "0.1");
            set("amplitude", "0.25");
            break;
        case Experiment::Moving:
            set("moving_sizes", "64,128,256");
            set("nu_list", "10");
            set("dt_ratio", "0.25");
            set("amplitude", "0.25");
            break;
        case Experiment::Curve:
        case Experiment::Surface:
            set("velocity", "leveque");
            set("period", "3");
            set("T", "1.5");
            set("charts", "all");
            set("ambient_order", "1");
            set("ambient_remap", "1e-3");
            set("rk_substeps", "1");
            set("archive_submaps", "true");
            set("nu", "2");
            set("curve_stat_cells", "1024");
            set("output_times", "0,0.6,0.9,1.5");
            set("custom_kind", "none");
            set("custom_name", "custom");
            set("mesh_cells", "64");
            break;
        case Experiment::Convergence:
            set("interp_sizes", "16,32,64");
            set("conv_sizes", "16,32,64");
            set("conv_T", "0.05");
            set("conv_dt", "1/1280");
            set("conv_time_cells", "64");
            set("conv_time_steps", "4,8,16");
            break;
        }
        apply_preset("desk");
    }

    Experiment experiment() const { return experiment_; }

    /// desk: ambient 32^3 with dt = 1/48, redistribution 64, statistics 128^2.
    /// paper: ambient 64^3 with dt = 1/96, redistribution 128, statistics 256^2.
    void apply_preset(const std::string& name)
    {
        const bool desk = name == "desk";
        if (!desk && name != "paper") throw ConfigError("unknown preset '" + name + "' (desk or paper)");
        values_["preset"] = name;
        if (experiment_ == Experiment::Moving) {
            set("T", desk ? "1/3" : "3");
            set("inner_steps", desk ? "1" : "0");
        }
        if (experiment_ == Experiment::Curve || experiment_ == Experiment::Surface) {
            set("ambient_cells", desk ? "32" : "64");
            set("ambient_dt", desk ? "1/48" : "1/96");
            set("redist_cells", desk ? "64" : "128");
            set("stat_cells", desk ? "128" : "256");
            set("samples", desk ? "20000" : "200000");
        }
    }

    void set(const std::string& key, const std::string& raw)
    {
        const config_detail::Key* k = config_detail::find_key(key);
        if (!k) throw ConfigError("unknown key '" + key + "'");
        const std::string value = config_detail::trim(raw);
        config_detail::validate(*k, value);
        if (key == "experiment" && value != experiment_name(experiment_)) {
            throw ConfigError("config is for experiment '" + value + "', not '" + experiment_name(experiment_) + "'");
        }
        if (key == "preset") {
            apply_preset(value);
            return;
        }
        values_[key] = value;
    }

    /// Reads `key = value` lines; a `preset` line is applied where it appears.
    void load(std::istream& is, const std::string& origin = "config")
    {
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string body = config_detail::trim(line);
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            }
            try {
                set(config_detail::trim(body.substr(0, eq)), body.substr(eq + 1));
            } catch (const ConfigError& e) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    void load_file(const std::filesystem::path& path)
    {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file " + path.string());
        load(is, path.string());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& text(const std::string& key) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const
    {
        double v = 0.0;
        config_detail::parse_real(text(key), v);
        return v;
    }

    int integer(const std::string& key) const
    {
        long v = 0;
        config_detail::parse_int(text(key), v);
        if (v > std::numeric_limits<int>::max()) throw ConfigError("'" + key + "' is too large");
        return static_cast<int>(v);
    }

    bool flag(const std::string& key) const
    {
        bool v = false;
        config_detail::parse_flag(text(key), v);
        return v;
    }

    std::vector<double> reals(const std::string& key) const
    {
        std::vector<double> out;
        for (const auto& it : config_detail::split(text(key))) {
            double v = 0.0;
            config_detail::parse_real(it, v);
            out.push_back(v);
        }
        return out;
    }

    std::vector<int> integers(const std::string& key) const
    {
        std::vector<int> out;
        for (const auto& it : config_detail::split(text(key))) {
            long v = 0;
            config_detail::parse_int(it, v);
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

    std::vector<std::string> words(const std::string& key) const { return config_detail::split(text(key)); }

    std::array<double, 3> vec3(const std::string& key) const
    {
        const auto v = reals(key);
        return {v[0], v[1], v[2]};
    }

    /// Sorted `key = value` lines of every effective value (the hashed form).
    std::string canonical() const
    {
        std::string s;
        for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
        return s;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    Experiment experiment_;
    std::map<std::string, std::string> values_;
};

} // namespace cmflow

#pragma once

// Run configuration. Keys mirror the SolverConfig / BacktestConfig field
// names; files are flat JSON objects or flat TOML key = value tables.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "eapo/backtest.hpp"
#include "eapo/data_io.hpp"
#include "eapo/solver.hpp"
#include "eapo/types.hpp"

namespace eapo {

struct RunConfig {
    BacktestConfig backtest;
    Scope scope = Scope::one;
    bool strict = false;
    int impute_k = 8;
    int disclosure_lag_days = 0;
    std::uint64_t seed = 42;

    // inference
    int bandwidth = 20;
    int block_length = 20;
    int replications = 2000;

    SynthSpec synth;

    // frontier
    int mu_points = 41;
    double mu_max = 0.0; // <= 0 selects a range covering every crossover
    std::string frontier_mode = "vertex";

    // sweep grids
    std::vector<double> gamma_grid{0.0, 1.0, 2.0, 3.5, 5.0};
    std::vector<double> theta_grid{0.5};
    std::vector<int> m_grid{1, 10};

    // dp-demo
    int dp_horizon = 2;
    int dp_assets = 2;
    int dp_disturbances = 3;
    double dp_grid_step = 0.1;
    double dp_beta = 0.95;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!parse_double(trim(v), out)) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

inline int to_int(const std::string& key, const std::string& v) {
    int out = 0;
    if (!parse_int(trim(v), out)) throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(std::string v) {
    v = trim(v);
    if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace detail

/// Applies one key. Unknown keys are configuration errors.
inline void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& raw_value) {
    using namespace detail;
    const std::string v = unquote(raw_value);
    SolverConfig& s = cfg.backtest.solver;
    const std::map<std::string, std::function<void()>> setters = {
        {"gamma", [&] { s.gamma = to_double(key, v); }},
        {"theta", [&] { s.theta = to_double(key, v); }},
        {"m", [&] { s.m = to_int(key, v); }},
        {"p", [&] { s.p = ball_norm_from_string(v); }},
        {"eta", [&] { s.eta = to_double(key, v); }},
        {"max_iters", [&] { s.max_iters = to_int(key, v); }},
        {"turnover_cap",
         [&] {
             if (v.empty() || v == "none") s.turnover_cap.reset();
             else s.turnover_cap = to_double(key, v);
         }},
        {"tol", [&] { s.tol = to_double(key, v); }},
        {"absorb_lipschitz", [&] { s.absorb_lipschitz = to_bool(key, v); }},
        {"seed",
         [&] {
             cfg.seed = static_cast<std::uint64_t>(to_int(key, v));
             s.seed = cfg.seed;
         }},
        {"lookback", [&] { cfg.backtest.lookback = to_int(key, v); }},
        {"cost_bps", [&] { cfg.backtest.cost_bps = to_double(key, v); }},
        {"strategy", [&] { cfg.backtest.strategy = strategy_from_string(v); }},
        {"annualization", [&] { cfg.backtest.annualization = to_double(key, v); }},
        {"shrinkage",
         [&] {
             if (v == "constant_correlation") cfg.backtest.shrinkage = ShrinkageTarget::constant_correlation;
             else if (v == "identity_scaled") cfg.backtest.shrinkage = ShrinkageTarget::identity_scaled;
             else throw ConfigError("config key 'shrinkage': expected constant_correlation or identity_scaled");
         }},
        {"scope", [&] { cfg.scope = scope_from_int(to_int(key, v)); }},
        {"strict", [&] { cfg.strict = to_bool(key, v); }},
        {"impute_k", [&] { cfg.impute_k = to_int(key, v); }},
        {"disclosure_lag_days", [&] { cfg.disclosure_lag_days = to_int(key, v); }},
        {"bandwidth", [&] { cfg.bandwidth = to_int(key, v); }},
        {"block_length", [&] { cfg.block_length = to_int(key, v); }},
        {"replications", [&] { cfg.replications = to_int(key, v); }},
        {"n_assets", [&] { cfg.synth.n_assets = to_int(key, v); }},
        {"n_days", [&] { cfg.synth.n_days = to_int(key, v); }},
        {"n_sectors", [&] { cfg.synth.n_sectors = to_int(key, v); }},
        {"intensity_return_corr", [&] { cfg.synth.intensity_return_corr = to_double(key, v); }},
        {"missing_rate", [&] { cfg.synth.missing_rate = to_double(key, v); }},
        {"mu_points", [&] { cfg.mu_points = to_int(key, v); }},
        {"mu_max", [&] { cfg.mu_max = to_double(key, v); }},
        {"frontier_mode",
         [&] {
             if (v != "vertex" && v != "regularized")
                 throw ConfigError("config key 'frontier_mode': expected vertex or regularized");
             cfg.frontier_mode = v;
         }},
        {"gamma_grid",
         [&] {
             cfg.gamma_grid.clear();
             for (const auto& x : split_list(raw_value)) cfg.gamma_grid.push_back(to_double(key, x));
         }},
        {"theta_grid",
         [&] {
             cfg.theta_grid.clear();
             for (const auto& x : split_list(raw_value)) cfg.theta_grid.push_back(to_double(key, x));
         }},
        {"m_grid",
         [&] {
             cfg.m_grid.clear();
             for (const auto& x : split_list(raw_value)) cfg.m_grid.push_back(to_int(key, x));
         }},
        {"dp_horizon", [&] { cfg.dp_horizon = to_int(key, v); }},
        {"dp_assets", [&] { cfg.dp_assets = to_int(key, v); }},
        {"dp_disturbances", [&] { cfg.dp_disturbances = to_int(key, v); }},
        {"dp_grid_step", [&] { cfg.dp_grid_step = to_double(key, v); }},
        {"dp_beta", [&] { cfg.dp_beta = to_double(key, v); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second();
}

/// Flattens a JSON document into key/value strings (nested objects contribute
/// their leaf keys, arrays become comma lists).
inline std::vector<std::pair<std::string, std::string>> flatten_json(const nlohmann::json& j) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!j.is_object()) throw ConfigError("config: JSON root must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        if (v.is_object()) {
            for (auto& kv : flatten_json(v)) out.push_back(std::move(kv));
        } else if (v.is_array()) {
            std::string list;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) list += ",";
                list += v[i].is_string() ? v[i].get<std::string>() : v[i].dump();
            }
            out.emplace_back(it.key(), list);
        } else if (v.is_string()) {
            out.emplace_back(it.key(), v.get<std::string>());
        } else if (v.is_null()) {
            out.emplace_back(it.key(), "none");
        } else {
            out.emplace_back(it.key(), v.dump());
        }
    }
    return out;
}

/// Loads a .json file, or otherwise a flat TOML/INI file of key = value lines
/// (section headers are accepted; only leaf key names matter).
inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> kv;
    if (path.extension() == ".json") {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + path.string() + ": " + e.what());
        }
        kv = flatten_json(j);
    } else {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(in, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError("config " + path.string() + ": " + e.what());
        }
        std::function<void(const boost::property_tree::ptree&)> walk = [&](const boost::property_tree::ptree& node) {
            for (const auto& [key, child] : node) {
                if (child.empty()) kv.emplace_back(key, child.data());
                else walk(child);
            }
        };
        walk(tree);
    }
    for (const auto& [key, value] : kv) apply_config_value(cfg, key, value);
}

/// Configuration echoed into reports.
inline nlohmann::json config_to_json(const RunConfig& cfg) {
    const SolverConfig& s = cfg.backtest.solver;
    nlohmann::json j;
    j["gamma"] = s.gamma;
    j["theta"] = s.theta;
    j["m"] = s.m;
    j["p"] = to_string(s.p);
    j["eta"] = s.eta;
    j["max_iters"] = s.max_iters;
    j["turnover_cap"] = s.turnover_cap ? nlohmann::json(*s.turnover_cap) : nlohmann::json(nullptr);
    j["tol"] = s.tol;
    j["absorb_lipschitz"] = s.absorb_lipschitz;
    j["lookback"] = cfg.backtest.lookback;
    j["cost_bps"] = cfg.backtest.cost_bps;
    j["annualization"] = cfg.backtest.annualization;
    j["scope"] = static_cast<int>(cfg.scope);
    j["strict"] = cfg.strict;
    j["impute_k"] = cfg.impute_k;
    j["disclosure_lag_days"] = cfg.disclosure_lag_days;
    j["seed"] = cfg.seed;
    return j;
}

} // namespace eapo

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssdiag/core_data.hpp"
#include "ssdiag/error.hpp"
#include "ssdiag/estimators.hpp"
#include "ssdiag/io.hpp"

namespace ssdiag {

/// Resolved command configuration: the JSON config document with CLI flags
/// applied on top. Workers and the output path never affect results and are
/// left out of the echo embedded in reports.
struct RunConfig {
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::optional<std::string> out;

    // sim
    std::optional<std::size_t> reps;   // outer Monte Carlo replications
    std::optional<std::size_t> perms;  // shock draws / permutations per simulation
    double alpha = 0.05;
    double threshold = 0.1;
    ShockLaw shock_law = ShockLaw::iid_standard_normal;
    std::vector<Estimator> estimators;  // empty: command default
    std::vector<std::string> modes;     // empty: command default

    // data
    std::optional<std::string> shares_path;
    std::optional<std::string> outcomes_path;
    std::optional<std::vector<double>> realized_shocks;

    // mc-table
    std::string panels = "ABCDE";
    std::vector<std::size_t> n_states{20, 100};
    std::size_t per_state = 10;
    bool full_budget = false;

    // flag-curve
    std::vector<double> gamma_grid{0.0, 0.25, 0.5, 1.0, 2.0};
    std::size_t regions = 200;
    std::size_t sectors = 30;
    std::size_t cluster_size = 5;
    std::size_t sectors_per_region = 3;
    std::optional<std::uint64_t> share_seed;

    // analytic
    double beta = 0.0;
    double sigma2 = 1.0;
    double rho = 0.0;
    std::size_t m = 2;

    // oracle
    std::vector<double> oracle_y;
    std::optional<std::size_t> groups;
    std::size_t group_size = 1;

    std::uint64_t require_seed() const {
        if (!seed) throw ValidationError("--seed is required for simulation commands");
        return *seed;
    }
};

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, std::optional<T>& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ValidationError("unknown config key '" + where + key + "'");
        }
    }
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base.empty()) return path.string();
    return (base / path).lexically_normal().string();
}

}  // namespace detail

/// Applies a JSON config document. Relative data paths resolve against
/// `base_dir` (the config file's directory).
inline void apply_config(RunConfig& cfg, const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    try {
        if (!doc.is_object()) throw ValidationError("config must be a JSON object");
        detail::reject_unknown(doc, {"seed", "workers", "out", "sim", "data", "mc_table", "flag_curve", "analytic", "oracle"},
                               "");
        detail::read_key(doc, "seed", cfg.seed);
        detail::read_key(doc, "workers", cfg.workers);
        detail::read_key(doc, "out", cfg.out);
        if (doc.contains("sim")) {
            const auto& s = doc.at("sim");
            detail::reject_unknown(s, {"reps", "perms", "alpha", "threshold", "shock_law", "estimators", "modes"}, "sim.");
            detail::read_key(s, "reps", cfg.reps);
            detail::read_key(s, "perms", cfg.perms);
            detail::read_key(s, "alpha", cfg.alpha);
            detail::read_key(s, "threshold", cfg.threshold);
            if (s.contains("shock_law")) cfg.shock_law = parse_shock_law(s.at("shock_law").get<std::string>());
            if (s.contains("estimators")) {
                cfg.estimators.clear();
                for (const auto& e : s.at("estimators")) cfg.estimators.push_back(parse_estimator(e.get<std::string>()));
            }
            detail::read_key(s, "modes", cfg.modes);
        }
        if (doc.contains("data")) {
            const auto& d = doc.at("data");
            detail::reject_unknown(d, {"shares", "outcomes", "realized_shocks"}, "data.");
            if (d.contains("shares")) cfg.shares_path = detail::resolve_path(d.at("shares").get<std::string>(), base_dir);
            if (d.contains("outcomes")) {
                cfg.outcomes_path = detail::resolve_path(d.at("outcomes").get<std::string>(), base_dir);
            }
            detail::read_key(d, "realized_shocks", cfg.realized_shocks);
        }
        if (doc.contains("mc_table")) {
            const auto& t = doc.at("mc_table");
            detail::reject_unknown(t, {"panels", "n_states", "per_state", "full_budget"}, "mc_table.");
            detail::read_key(t, "panels", cfg.panels);
            detail::read_key(t, "n_states", cfg.n_states);
            detail::read_key(t, "per_state", cfg.per_state);
            detail::read_key(t, "full_budget", cfg.full_budget);
        }
        if (doc.contains("flag_curve")) {
            const auto& f = doc.at("flag_curve");
            detail::reject_unknown(f, {"gamma_grid", "regions", "sectors", "cluster_size", "sectors_per_region", "share_seed"},
                                   "flag_curve.");
            detail::read_key(f, "gamma_grid", cfg.gamma_grid);
            detail::read_key(f, "regions", cfg.regions);
            detail::read_key(f, "sectors", cfg.sectors);
            detail::read_key(f, "cluster_size", cfg.cluster_size);
            detail::read_key(f, "sectors_per_region", cfg.sectors_per_region);
            detail::read_key(f, "share_seed", cfg.share_seed);
        }
        if (doc.contains("analytic")) {
            const auto& a = doc.at("analytic");
            detail::reject_unknown(a, {"beta", "sigma2", "rho", "m"}, "analytic.");
            detail::read_key(a, "beta", cfg.beta);
            detail::read_key(a, "sigma2", cfg.sigma2);
            detail::read_key(a, "rho", cfg.rho);
            detail::read_key(a, "m", cfg.m);
        }
        if (doc.contains("oracle")) {
            const auto& o = doc.at("oracle");
            detail::reject_unknown(o, {"y", "groups", "group_size"}, "oracle.");
            detail::read_key(o, "y", cfg.oracle_y);
            detail::read_key(o, "groups", cfg.groups);
            detail::read_key(o, "group_size", cfg.group_size);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid config: ") + e.what());
    }
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    apply_config(cfg, doc, path.parent_path());
}

inline nlohmann::json echo_sim(const RunConfig& cfg) {
    nlohmann::json j;
    j["alpha"] = cfg.alpha;
    j["threshold"] = cfg.threshold;
    j["shock_law"] = std::string(to_string(cfg.shock_law));
    return j;
}

}  // namespace ssdiag

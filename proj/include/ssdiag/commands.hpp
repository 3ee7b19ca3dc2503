#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssdiag/analytics.hpp"
#include "ssdiag/config.hpp"
#include "ssdiag/core_data.hpp"
#include "ssdiag/dgp.hpp"
#include "ssdiag/estimators.hpp"
#include "ssdiag/io.hpp"
#include "ssdiag/sim_engines.hpp"
#include "ssdiag/version.hpp"

// Each command is a pure function of (input files, config, seed) returning
// the report text; the CLI only handles argument parsing and writing.

namespace ssdiag::commands {

inline constexpr std::size_t kDiagnosePerms = 1000;
inline constexpr std::size_t kTableReps = 2000;
inline constexpr std::size_t kTablePerms = 200;
inline constexpr std::size_t kTableFullReps = 20000;
inline constexpr std::size_t kTableFullPerms = 500;
inline constexpr std::size_t kFlagReps = 1000;
inline constexpr std::size_t kFlagPerms = 200;

namespace detail {

inline nlohmann::json header(const std::string& command) {
    return {{"tool", "ssdiag"}, {"version", kVersion}, {"command", command}};
}

inline std::string csv_preamble(const std::string& command, const RunConfig& cfg, const std::string& extra) {
    std::string out = "# ssdiag " + std::string(kVersion) + " " + command;
    if (cfg.seed) out += " seed=" + std::to_string(*cfg.seed);
    out += " alpha=" + io::format_number(cfg.alpha) + " threshold=" + io::format_number(cfg.threshold) + extra + "\n";
    return out;
}

inline nlohmann::json report_json(const SimReport& report, double threshold) {
    nlohmann::json j;
    j["mode"] = std::string(to_string(report.mode));
    j["replications"] = report.replications;
    j["effective"] = report.effective;
    j["skipped_degenerate"] = report.skipped_degenerate;
    nlohmann::json est = nlohmann::json::object();
    for (const auto& r : report.rates) {
        const Proportion p = Proportion::from_counts(r.rejections, report.effective);
        est[std::string(to_string(r.estimator))] = {{"gamma", r.rate},
                                                    {"rejections", r.rejections},
                                                    {"mc_se", p.std_error},
                                                    {"flag", r.rate > threshold}};
    }
    j["estimators"] = est;
    return j;
}

inline bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace detail

/// Ordered diagnostic workflow on user data: y-fixed simulation over the
/// estimator menu, then eps-fixed and placebo simulations for the
/// cluster-robust estimators. Gamma > threshold raises a flag.
inline std::string diagnose(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed();
    if (!cfg.shares_path || !cfg.outcomes_path) throw ValidationError("diagnose needs shares and outcomes files");
    Dataset data = io::ingest(*cfg.shares_path, *cfg.outcomes_path);

    if (!data.x_realized && cfg.realized_shocks) {
        if (cfg.realized_shocks->size() != data.sectors()) {
            throw ValidationError("realized_shocks has " + std::to_string(cfg.realized_shocks->size()) +
                                  " entries, expected " + std::to_string(data.sectors()));
        }
        data.x_realized = build_shift_share(data.shares, std::span<const double>(*cfg.realized_shocks));
    }

    std::vector<Estimator> menu = cfg.estimators;
    if (menu.empty()) {
        menu = {Estimator::robust_hc1, Estimator::robust_hc3};
        if (data.clusters) {
            menu.push_back(Estimator::crve);
            menu.push_back(Estimator::crve_hc3);
        }
        menu.push_back(Estimator::score_agg);
        menu.push_back(Estimator::score_agg_null);
    }
    if (std::any_of(menu.begin(), menu.end(), is_cluster_estimator)) require_clusters(data);

    std::vector<std::string> modes = cfg.modes;
    if (modes.empty()) {
        modes.push_back("y-fixed");
        if (data.x_realized) modes.push_back("eps-fixed");
        if (data.y_placebo) modes.push_back("placebo");
    }
    for (const auto& mode : modes) {
        if (mode != "y-fixed" && mode != "eps-fixed" && mode != "placebo") {
            throw ValidationError("unknown simulation mode '" + mode + "'");
        }
    }
    if (detail::contains(modes, "eps-fixed") && !data.x_realized) throw ValidationError("missing realized shocks");
    if (detail::contains(modes, "placebo") && !data.y_placebo) throw ValidationError("missing placebo column");

    // Alternative simulations target the cluster-robust estimators.
    std::vector<Estimator> follow_up;
    for (Estimator e : menu) {
        if (is_cluster_estimator(e)) follow_up.push_back(e);
    }
    if (follow_up.empty()) {
        for (Estimator e : menu) {
            if (!is_score_estimator(e)) follow_up.push_back(e);
        }
    }
    if (follow_up.empty()) follow_up = menu;

    SimConfig sim;
    sim.replications = cfg.perms.value_or(kDiagnosePerms);
    sim.shock_law = cfg.shock_law;
    sim.alpha = cfg.alpha;
    sim.flag_threshold = cfg.threshold;
    sim.seed = seed;
    sim.workers = cfg.workers;

    nlohmann::json out = detail::header("diagnose");
    out["seed"] = seed;
    nlohmann::json echo = echo_sim(cfg);
    echo["perms"] = sim.replications;
    echo["shares"] = *cfg.shares_path;
    echo["outcomes"] = *cfg.outcomes_path;
    echo["modes"] = modes;
    nlohmann::json menu_names = nlohmann::json::array();
    for (Estimator e : menu) menu_names.push_back(std::string(to_string(e)));
    echo["estimators"] = menu_names;
    out["config"] = echo;
    out["data"] = {{"regions", data.regions()},
                   {"sectors", data.sectors()},
                   {"clusters", data.cluster_count()},
                   {"has_placebo", data.y_placebo.has_value()},
                   {"has_realized_regressor", data.x_realized.has_value()}};

    std::optional<double> beta_hat;
    if (data.x_realized) {
        const RegressionFit fit = ols_simple(data.y, *data.x_realized);
        beta_hat = fit.slope;
        nlohmann::json realized = {{"slope", fit.slope}, {"intercept", fit.intercept}};
        nlohmann::json tests = nlohmann::json::object();
        for (Estimator e : menu) {
            const VarianceEstimate v = estimate_variance(e, fit, data);
            const TTest t = t_test(fit.slope, 0.0, v, cfg.alpha);
            tests[std::string(to_string(e))] = {{"std_error", std::sqrt(v.value)},
                                                {"dof", v.dof},
                                                {"statistic", t.statistic},
                                                {"p_value", t.p_value}};
        }
        realized["tests"] = tests;
        out["realized"] = realized;
    }

    nlohmann::json sims = nlohmann::json::array();
    nlohmann::json flags = nlohmann::json::object();
    auto record = [&](const SimReport& report) {
        sims.push_back(detail::report_json(report, cfg.threshold));
        nlohmann::json f = nlohmann::json::object();
        for (const auto& r : report.rates) f[std::string(to_string(r.estimator))] = r.rate > cfg.threshold;
        flags[std::string(to_string(report.mode))] = f;
    };
    if (detail::contains(modes, "y-fixed")) {
        sim.estimators = menu;
        record(run_y_fixed(data, sim));
    }
    if (detail::contains(modes, "eps-fixed")) {
        sim.estimators = follow_up;
        record(run_eps_fixed(data, *data.x_realized, *beta_hat, sim));
    }
    if (detail::contains(modes, "placebo")) {
        sim.estimators = follow_up;
        record(run_placebo(data, sim));
    }
    out["simulations"] = sims;
    out["flags"] = flags;
    return out.dump(2) + "\n";
}

/// Grouped-design Monte Carlo table: panels x state counts.
inline std::string mc_table(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed();
    const std::size_t reps = cfg.reps.value_or(cfg.full_budget ? kTableFullReps : kTableReps);
    SimConfig sim;
    sim.replications = cfg.perms.value_or(cfg.full_budget ? kTableFullPerms : kTablePerms);
    sim.alpha = cfg.alpha;
    sim.flag_threshold = cfg.threshold;
    sim.seed = seed;
    sim.workers = cfg.workers;
    sim.estimators = {cfg.estimators.empty() ? Estimator::robust_hc1 : cfg.estimators.front()};
    if (cfg.panels.empty()) throw ValidationError("no panels requested");
    if (cfg.n_states.empty()) throw ValidationError("no state counts requested");

    std::string out = detail::csv_preamble("mc-table", cfg,
                                           " reps=" + std::to_string(reps) + " perms=" +
                                               std::to_string(sim.replications) + " per_state=" +
                                               std::to_string(cfg.per_state) + " estimator=" +
                                               std::string(to_string(sim.estimators.front())));
    out += "panel,N,size,size_mc_se,pr_y,pr_y_mc_se,pr_eps,pr_eps_mc_se\n";
    for (char id : cfg.panels) {
        const TablePanel& panel = table_panel(id);
        for (std::size_t n : cfg.n_states) {
            const TableA1Result r = experiment_table_a1(panel_dgp(panel, n, cfg.per_state), reps, sim);
            out += std::string(1, id) + ',' + std::to_string(n);
            for (const Proportion& p : {r.size, r.pr_gamma_y, r.pr_gamma_eps}) {
                out += ',' + io::format_fixed(p.value, 4) + ',' + io::format_fixed(p.std_error, 4);
            }
            out += '\n';
        }
    }
    return out;
}

/// Flagging probability curve over a grid of spatial-correlation strengths.
inline std::string flag_curve(const RunConfig& cfg) {
    const std::uint64_t seed = cfg.require_seed();
    for (std::size_t k = 1; k < cfg.gamma_grid.size(); ++k) {
        if (!(cfg.gamma_grid[k] > cfg.gamma_grid[k - 1])) throw ValidationError("gamma grid must be strictly increasing");
    }
    DenseMatrix shares;
    std::vector<int> clusters;
    std::string source;
    if (cfg.shares_path) {
        if (!cfg.outcomes_path) throw ValidationError("flag-curve with user shares needs an outcomes file with clusters");
        const Dataset data = io::ingest(*cfg.shares_path, *cfg.outcomes_path);
        require_clusters(data);
        shares = data.shares;
        clusters = *data.clusters;
        source = " shares=" + *cfg.shares_path;
    } else {
        const std::uint64_t share_seed = cfg.share_seed.value_or(seed);
        SyntheticShares synthetic =
            make_synthetic_shares(cfg.regions, cfg.sectors, cfg.cluster_size, cfg.sectors_per_region, share_seed);
        shares = std::move(synthetic.shares);
        clusters = std::move(synthetic.clusters);
        source = " shares=synthetic regions=" + std::to_string(cfg.regions) + " sectors=" + std::to_string(cfg.sectors) +
                 " cluster_size=" + std::to_string(cfg.cluster_size) +
                 " sectors_per_region=" + std::to_string(cfg.sectors_per_region) +
                 " share_seed=" + std::to_string(share_seed);
    }
    SimConfig sim;
    sim.replications = cfg.perms.value_or(kFlagPerms);
    sim.alpha = cfg.alpha;
    sim.flag_threshold = cfg.threshold;
    sim.seed = seed;
    sim.workers = cfg.workers;
    sim.estimators = {Estimator::crve};
    const std::size_t reps = cfg.reps.value_or(kFlagReps);
    const auto points = experiment_flagging_curve(shares, clusters, cfg.gamma_grid, reps, sim);

    std::string out = detail::csv_preamble(
        "flag-curve", cfg, " reps=" + std::to_string(reps) + " perms=" + std::to_string(sim.replications) + source);
    out += "gamma,size,size_mc_se,pr_flag_y,pr_flag_y_mc_se,pr_flag_eps,pr_flag_eps_mc_se,mean_slope\n";
    for (const auto& p : points) {
        out += io::format_number(p.gamma_sc);
        for (const Proportion& q : {p.size, p.pr_flag_y, p.pr_flag_eps}) {
            out += ',' + io::format_fixed(q.value, 4) + ',' + io::format_fixed(q.std_error, 4);
        }
        out += ',' + io::format_fixed(p.mean_slope, 6) + '\n';
    }
    return out;
}

inline std::string analytic(const RunConfig& cfg) {
    const StylizedParams p{cfg.beta, cfg.sigma2, cfg.rho, cfg.m};
    nlohmann::json out = detail::header("analytic");
    out["params"] = {{"beta", p.beta}, {"sigma2", p.sigma2}, {"rho", p.rho}, {"m", p.m}};
    out["y_fixed_ratio_limit"] = prop1_ratio_limit(p);
    out["eps_fixed_ratio_limit"] = propA2_ratio_limit(p);
    return out.dump(2) + "\n";
}

/// Closed-form randomization variance vs brute-force enumeration.
inline std::string oracle(const RunConfig& cfg) {
    if (cfg.oracle_y.empty()) throw ValidationError("oracle needs an outcome vector (--y)");
    if (cfg.group_size < 1) throw ValidationError("group size must be >= 1");
    const std::size_t f = cfg.groups.value_or(cfg.oracle_y.size() / cfg.group_size);
    if (f * cfg.group_size != cfg.oracle_y.size()) {
        throw ValidationError("outcome length " + std::to_string(cfg.oracle_y.size()) + " is not groups x group_size");
    }
    const PartitionDesign design = PartitionDesign::first_half_treated(f, cfg.group_size);
    const AssignmentMoments moments = enumerate_assignment_variance(cfg.oracle_y, design);
    const double v_true = randomization_variance_true(cfg.oracle_y, design);
    const double v_robust = randomization_variance_robust(cfg.oracle_y, design);

    nlohmann::json out = detail::header("oracle");
    out["groups"] = f;
    out["group_size"] = cfg.group_size;
    out["assignments"] = moments.assignments;
    out["oracle_mean"] = moments.mean;
    out["oracle_variance"] = moments.variance;
    out["formula_true"] = v_true;
    out["formula_robust"] = v_robust;
    out["formula_to_oracle_ratio"] = moments.variance > 0.0 ? nlohmann::json(v_true / moments.variance) : nlohmann::json();
    out["expected_ratio"] = (static_cast<double>(f) - 1.0) / (static_cast<double>(f) - 2.0);
    return out.dump(2) + "\n";
}

inline std::string run(const std::string& command, const RunConfig& cfg) {
    if (command == "diagnose") return diagnose(cfg);
    if (command == "mc-table") return mc_table(cfg);
    if (command == "flag-curve") return flag_curve(cfg);
    if (command == "analytic") return analytic(cfg);
    if (command == "oracle") return oracle(cfg);
    throw ValidationError("unknown command '" + command + "'");
}

}  // namespace ssdiag::commands

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ssdiag/commands.hpp"
#include "ssdiag/parallel.hpp"

namespace {

struct Flags {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out;
    std::optional<std::size_t> reps;
    std::optional<std::size_t> perms;
    std::optional<double> alpha;
    std::optional<double> threshold;

    std::optional<std::string> shares;
    std::optional<std::string> outcomes;
    std::vector<std::string> modes;
    std::vector<std::string> estimators;
    std::optional<std::string> shock_law;
    std::optional<std::string> panels;
    bool full_budget = false;
    std::vector<double> gammas;
    std::optional<double> beta, sigma2, rho;
    std::optional<std::size_t> m;
    std::vector<double> y;
    std::optional<std::size_t> groups, group_size;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON config document")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--workers", f.workers, "worker threads (default: SSDIAG_WORKERS or 1)");
    sub->add_option("--out", f.out, "output path (default: stdout)");
    sub->add_option("--reps", f.reps, "outer Monte Carlo replications");
    sub->add_option("--perms", f.perms, "shock draws per simulation");
    sub->add_option("--alpha", f.alpha, "test level");
    sub->add_option("--threshold", f.threshold, "flag threshold on Gamma");
}

ssdiag::RunConfig resolve(const Flags& f) {
    ssdiag::RunConfig cfg;
    if (const char* env = std::getenv("SSDIAG_WORKERS")) {
        try {
            cfg.workers = static_cast<unsigned>(std::stoul(env));
        } catch (const std::exception&) {
            throw ssdiag::ValidationError("SSDIAG_WORKERS is not a number");
        }
    }
    if (f.config) ssdiag::load_config_file(cfg, *f.config);
    if (f.seed) cfg.seed = f.seed;
    if (f.workers) cfg.workers = *f.workers;
    if (cfg.workers == 0) cfg.workers = 1;
    if (f.out) cfg.out = f.out;
    if (f.reps) cfg.reps = f.reps;
    if (f.perms) cfg.perms = f.perms;
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.threshold) cfg.threshold = *f.threshold;
    if (f.shares) cfg.shares_path = f.shares;
    if (f.outcomes) cfg.outcomes_path = f.outcomes;
    if (!f.modes.empty()) cfg.modes = f.modes;
    if (!f.estimators.empty()) {
        cfg.estimators.clear();
        for (const auto& e : f.estimators) cfg.estimators.push_back(ssdiag::parse_estimator(e));
    }
    if (f.shock_law) cfg.shock_law = ssdiag::parse_shock_law(*f.shock_law);
    if (f.panels) cfg.panels = *f.panels;
    if (f.full_budget) cfg.full_budget = true;
    if (!f.gammas.empty()) cfg.gamma_grid = f.gammas;
    if (f.beta) cfg.beta = *f.beta;
    if (f.sigma2) cfg.sigma2 = *f.sigma2;
    if (f.rho) cfg.rho = *f.rho;
    if (f.m) cfg.m = *f.m;
    if (!f.y.empty()) cfg.oracle_y = f.y;
    if (f.groups) cfg.groups = f.groups;
    if (f.group_size) cfg.group_size = *f.group_size;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Design-based simulation diagnostics for shift-share regressions"};
    app.set_version_flag("--version", std::string(ssdiag::kVersion));
    app.require_subcommand(1);
    Flags f;

    auto* diagnose = app.add_subcommand("diagnose", "run the y-fixed / eps-fixed / placebo diagnostic on user data");
    auto* mc_table = app.add_subcommand("mc-table", "grouped-design Monte Carlo table");
    auto* flag_curve = app.add_subcommand("flag-curve", "flagging probability against spatial correlation strength");
    auto* analytic = app.add_subcommand("analytic", "closed-form variance-ratio limits");
    auto* oracle = app.add_subcommand("oracle", "closed-form randomization variance against enumeration");
    for (auto* sub : {diagnose, mc_table, flag_curve, analytic, oracle}) add_common(sub, f);

    for (auto* sub : {diagnose, flag_curve}) {
        sub->add_option("--shares", f.shares, "shares CSV (region_id,s_1,...,s_F)");
        sub->add_option("--outcomes", f.outcomes, "outcomes CSV (region_id,y[,y_placebo][,cluster][,x_realized])");
    }
    diagnose->add_option("--modes", f.modes, "subset of y-fixed, eps-fixed, placebo")->delimiter(',');
    diagnose->add_option("--shock-law", f.shock_law, "iid-standard-normal or balanced-binary");
    for (auto* sub : {diagnose, mc_table}) {
        sub->add_option("--estimators", f.estimators, "estimator menu")->delimiter(',');
    }
    mc_table->add_option("--panels", f.panels, "panel letters, e.g. ABCDE");
    mc_table->add_flag("--full-budget", f.full_budget, "20000 outer reps x 500 permutations");
    flag_curve->add_option("--gammas", f.gammas, "strictly increasing gamma grid")->delimiter(',');
    analytic->add_option("--beta", f.beta);
    analytic->add_option("--sigma2", f.sigma2);
    analytic->add_option("--rho", f.rho);
    analytic->add_option("--m", f.m, "group size");
    oracle->add_option("--y", f.y, "outcome vector")->delimiter(',');
    oracle->add_option("--groups", f.groups);
    oracle->add_option("--group-size", f.group_size);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ssdiag::ErrorKind::validation);
    }

    try {
        const ssdiag::RunConfig cfg = resolve(f);
        const std::string command = app.get_subcommands().front()->get_name();
        const std::string report = ssdiag::commands::run(command, cfg);
        if (cfg.out) {
            std::ofstream file(*cfg.out, std::ios::binary | std::ios::trunc);
            if (!file) throw ssdiag::ValidationError("cannot open output file '" + *cfg.out + "'");
            file << report;
            if (!file) throw ssdiag::ValidationError("failed writing '" + *cfg.out + "'");
        } else {
            std::cout << report;
        }
    } catch (const ssdiag::Error& e) {
        std::cerr << "ssdiag: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "ssdiag: " << e.what() << '\n';
        return static_cast<int>(ssdiag::ErrorKind::validation);
    }
    return 0;
}

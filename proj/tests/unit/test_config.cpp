#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ssdiag/config.hpp"

using namespace ssdiag;
using Catch::Matchers::ContainsSubstring;
using nlohmann::json;

TEST_CASE("defaults") {
    const RunConfig cfg;
    CHECK_FALSE(cfg.seed);
    CHECK(cfg.alpha == 0.05);
    CHECK(cfg.threshold == 0.1);
    CHECK(cfg.panels == "ABCDE");
    CHECK_THROWS_WITH(cfg.require_seed(), ContainsSubstring("--seed"));
}

TEST_CASE("config sections apply") {
    RunConfig cfg;
    apply_config(cfg, json::parse(R"({
        "seed": 18446744073709551615,
        "workers": 3,
        "sim": {"reps": 10, "perms": 20, "alpha": 0.1, "threshold": 0.2, "shock_law": "balanced-binary",
                "estimators": ["crve", "score-agg-null"], "modes": ["y-fixed"]},
        "data": {"shares": "in/s.csv", "outcomes": "/abs/o.csv", "realized_shocks": [1, 2]},
        "mc_table": {"panels": "AD", "n_states": [20], "per_state": 5, "full_budget": true},
        "flag_curve": {"gamma_grid": [0, 1], "regions": 50, "sectors": 10, "cluster_size": 2,
                       "sectors_per_region": 2, "share_seed": 4},
        "analytic": {"beta": 1, "sigma2": 2, "rho": 0.5, "m": 3},
        "oracle": {"y": [1, 2, 3, 4], "groups": 4, "group_size": 1}
    })"),
                 "/cfg/dir");
    CHECK(*cfg.seed == 18446744073709551615ull);
    CHECK(cfg.workers == 3);
    CHECK(*cfg.reps == 10);
    CHECK(*cfg.perms == 20);
    CHECK(cfg.alpha == 0.1);
    CHECK(cfg.shock_law == ShockLaw::balanced_binary);
    CHECK(cfg.estimators == std::vector<Estimator>{Estimator::crve, Estimator::score_agg_null});
    CHECK(*cfg.shares_path == "/cfg/dir/in/s.csv");
    CHECK(*cfg.outcomes_path == "/abs/o.csv");
    CHECK(*cfg.realized_shocks == std::vector<double>{1, 2});
    CHECK(cfg.panels == "AD");
    CHECK(cfg.full_budget);
    CHECK(cfg.gamma_grid == std::vector<double>{0, 1});
    CHECK(*cfg.share_seed == 4);
    CHECK(cfg.m == 3);
    CHECK(cfg.oracle_y.size() == 4);
}

TEST_CASE("config errors are validation errors") {
    RunConfig cfg;
    CHECK_THROWS_WITH(apply_config(cfg, json::parse(R"({"sead": 1})")), ContainsSubstring("unknown config key 'sead'"));
    CHECK_THROWS_WITH(apply_config(cfg, json::parse(R"({"sim": {"bogus": 1}})")),
                      ContainsSubstring("'sim.bogus'"));
    CHECK_THROWS_AS(apply_config(cfg, json::parse(R"({"seed": "abc"})")), ValidationError);
    CHECK_THROWS_AS(apply_config(cfg, json::parse(R"({"sim": {"estimators": ["hc9"]}})")), ValidationError);
    CHECK_THROWS_AS(apply_config(cfg, json::parse(R"([1, 2])")), ValidationError);
}

TEST_CASE("config files") {
    const auto dir = std::filesystem::temp_directory_path() / "ssdiag_config_test";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "good.json") << R"({"seed": 5, "data": {"shares": "s.csv"}})";
    std::ofstream(dir / "bad.json") << R"({"seed": )";
    RunConfig cfg;
    load_config_file(cfg, dir / "good.json");
    CHECK(*cfg.seed == 5);
    CHECK(*cfg.shares_path == (dir / "s.csv").string());
    CHECK_THROWS_AS(load_config_file(cfg, dir / "bad.json"), ValidationError);
    CHECK_THROWS_AS(load_config_file(cfg, dir / "missing.json"), ValidationError);
    std::filesystem::remove_all(dir);
}

// Acceptance gate. `acceptance` runs every criterion; `acceptance N` runs one.
// Each criterion prints exactly one "[PASS]" or "[FAIL]" line, followed by
// indented detail lines. Exit status is nonzero if any selected criterion fails.

#include <sys/wait.h>

#include <boost/math/distributions/binomial.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ssdiag/analytics.hpp"
#include "ssdiag/commands.hpp"
#include "ssdiag/dgp.hpp"
#include "ssdiag/io.hpp"
#include "ssdiag/parallel.hpp"
#include "ssdiag/sim_engines.hpp"

using namespace ssdiag;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 12345;

// Tolerances.
constexpr double kFormulaTol = 1e-15;
constexpr double kFormulaBudgetSeconds = 1.0;
constexpr double kOracleMeanTol = 1e-12;   // times max |y|
constexpr double kOracleVarTol = 1e-10;    // relative
constexpr double kOracleBudgetSeconds = 10.0;
constexpr double kConvergenceRelTol = 0.05;
constexpr double kConvergenceBudgetSeconds = 120.0;
constexpr double kBetaFreePooledSe = 3.0;
constexpr double kTableAbsTol = 0.03;
constexpr double kTableSeMultiple = 4.0;
constexpr double kBinomialCoverage = 0.99;
constexpr double kEquivalenceTol = 1e-10;
constexpr double kFlagCurveSeMultiple = 5.0;

struct Outcome {
    bool pass = true;
    std::string summary;
    std::vector<std::string> details;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Exact binomial interval holding `coverage` of the mass of Bin(n, p), as rates.
std::pair<double, double> binomial_band(std::size_t n, double p) {
    boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
    const double tail = (1.0 - kBinomialCoverage) / 2.0;
    const double lo = boost::math::quantile(dist, tail);
    const double hi = boost::math::quantile(boost::math::complement(dist, tail));
    return {lo / static_cast<double>(n), hi / static_cast<double>(n)};
}

// 1. Closed-form limits.
Outcome formula_fidelity() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    struct Case {
        const char* what;
        double got, want;
    };
    const Case cases[] = {
        {"y-fixed limit, beta=1 sigma2=1 m=2 rho=0", prop1_ratio_limit({1.0, 1.0, 0.0, 2}), 5.0 / 6.0},
        {"y-fixed limit, beta=0 sigma2=1 m=2 rho=0.5", prop1_ratio_limit({0.0, 1.0, 0.5, 2}), 2.0 / 3.0},
        {"eps-fixed limit, sigma2=1 m=2 rho=0.5", propA2_ratio_limit({0.0, 1.0, 0.5, 2}), 2.0 / 3.0},
        {"y-fixed limit, beta=0 rho=0 m=7", prop1_ratio_limit({0.0, 2.0, 0.0, 7}), 1.0},
        {"y-fixed limit, m=1", prop1_ratio_limit({3.0, 0.5, 0.2, 1}), 1.0},
        {"eps-fixed limit, rho=0", propA2_ratio_limit({3.0, 0.5, 0.0, 4}), 1.0},
        {"eps-fixed limit, m=1", propA2_ratio_limit({3.0, 0.5, 0.4, 1}), 1.0},
    };
    for (const auto& c : cases) {
        const bool ok = std::abs(c.got - c.want) <= kFormulaTol;
        out.pass = out.pass && ok;
        out.details.push_back(fmt("%-44s %.17g vs %.17g %s", c.what, c.got, c.want, ok ? "ok" : "MISMATCH"));
    }
    RandomStream rng(kSeed);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        StylizedParams p;
        p.m = 1 + rng.below(20);
        p.sigma2 = 0.05 + 5.0 * rng.uniform();
        const double lo = p.m > 1 ? -p.sigma2 / static_cast<double>(p.m - 1) : -p.sigma2;
        // Keep the eps-fixed denominator strictly positive.
        p.rho = lo + (p.sigma2 - lo) * (0.001 + 0.999 * rng.uniform());
        p.beta = 0.0;
        worst = std::max(worst, std::abs(prop1_ratio_limit(p) - propA2_ratio_limit(p)));
    }
    const double elapsed = seconds_since(t0);
    out.pass = out.pass && worst <= kFormulaTol && elapsed < kFormulaBudgetSeconds;
    out.details.push_back(fmt("1000 random tuples: max |prop1(beta=0) - propA2| = %.3g (tol %.0e)", worst, kFormulaTol));
    out.summary = fmt("hand values and beta=0 identity, %.3f s (budget %.0f s)", elapsed, kFormulaBudgetSeconds);
    return out;
}

// 2. Closed form vs enumeration.
Outcome oracle_equivalence() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    RandomStream rng(kSeed);
    double worst_mean = 0.0, worst_var = 0.0;
    for (int k = 0; k < 200; ++k) {
        const std::size_t f = 4 + 2 * rng.below(3);
        const PartitionDesign design = PartitionDesign::first_half_treated(f, 1);
        std::vector<double> y(f);
        const double scale = std::exp(3.0 * rng.normal());
        double ymax = 0.0;
        for (double& v : y) {
            v = scale * rng.normal() + 10.0 * rng.normal();
            ymax = std::max(ymax, std::abs(v));
        }
        const AssignmentMoments mom = enumerate_assignment_variance(y, design);
        const double ff = static_cast<double>(f);
        const double scaled = randomization_variance_true(y, design) * (ff - 2.0) / (ff - 1.0);
        worst_mean = std::max(worst_mean, std::abs(mom.mean) / ymax);
        worst_var = std::max(worst_var, std::abs(scaled - mom.variance) / std::max(mom.variance, 1e-300));
    }
    const double elapsed = seconds_since(t0);
    out.pass = worst_mean <= kOracleMeanTol && worst_var <= kOracleVarTol && elapsed < kOracleBudgetSeconds;
    out.details.push_back(fmt("max |enumeration mean| / max|y| = %.3g (tol %.0e)", worst_mean, kOracleMeanTol));
    out.details.push_back(fmt("max relative gap, formula*(F-2)/(F-1) vs enumeration = %.3g (tol %.0e)", worst_var,
                              kOracleVarTol));
    out.summary = fmt("200 vectors, F in {4,6,8}, m=1, %.2f s (budget %.0f s)", elapsed, kOracleBudgetSeconds);
    return out;
}

// 3. y-fixed ratio at F = 2000.
Outcome prop1_convergence() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    const StylizedParams params[] = {{0.5, 1.0, 0.0, 2}, {0.0, 1.0, 0.5, 2}, {0.5, 1.0, 0.5, 2}, {0.0, 1.0, 0.0, 5}};
    const std::vector<std::size_t> grid{2000};
    for (const auto& p : params) {
        const auto row = ratio_convergence_experiment(p, grid, 200, kSeed, OutcomeMode::y_fixed, default_workers())[0];
        const double rel = std::abs(row.mean_ratio / row.limit - 1.0);
        const bool ok = rel <= kConvergenceRelTol;
        out.pass = out.pass && ok;
        out.details.push_back(fmt("beta=%.1f sigma2=%.0f m=%zu rho=%.1f: mean ratio %.5f (se %.5f), limit %.5f, rel gap %.4f %s",
                                  p.beta, p.sigma2, p.m, p.rho, row.mean_ratio, row.std_error, row.limit, rel,
                                  ok ? "ok" : "OUTSIDE"));
    }
    const double elapsed = seconds_since(t0);
    out.pass = out.pass && elapsed < kConvergenceBudgetSeconds;
    out.summary = fmt("F=2000, 200 replications, within %.0f%% of the limit, %.1f s", 100 * kConvergenceRelTol, elapsed);
    return out;
}

// 4. eps-fixed ratio does not move with beta.
Outcome propA2_beta_free() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::size_t> grid{2000};
    const double betas[] = {0.0, 0.5, 2.0};
    for (const auto& base : {StylizedParams{0.0, 1.0, 0.5, 2}, StylizedParams{0.0, 1.0, 0.0, 5}}) {
        std::vector<ConvergenceRow> rows;
        std::vector<double> limits;
        for (double b : betas) {
            StylizedParams p = base;
            p.beta = b;
            rows.push_back(ratio_convergence_experiment(p, grid, 200, kSeed, OutcomeMode::eps_fixed, default_workers())[0]);
            limits.push_back(propA2_ratio_limit(p));
        }
        const bool identical = limits[1] == limits[0] && limits[2] == limits[0];
        out.pass = out.pass && identical;
        for (std::size_t a = 0; a < rows.size(); ++a) {
            for (std::size_t b = a + 1; b < rows.size(); ++b) {
                const double pooled = std::hypot(rows[a].std_error, rows[b].std_error);
                const double gap = std::abs(rows[a].mean_ratio - rows[b].mean_ratio);
                const bool ok = gap <= kBetaFreePooledSe * pooled;
                out.pass = out.pass && ok;
                out.details.push_back(fmt("m=%zu rho=%.1f, beta %.1f vs %.1f: %.6f vs %.6f, gap %.3g (limit %.3g) %s",
                                          base.m, base.rho, betas[a], betas[b], rows[a].mean_ratio, rows[b].mean_ratio,
                                          gap, kBetaFreePooledSe * pooled, ok ? "ok" : "OUTSIDE"));
            }
        }
        out.details.push_back(fmt("m=%zu rho=%.1f: closed form %.17g across beta, %s", base.m, base.rho, limits[0],
                                  identical ? "bit-identical" : "DIFFERS"));
    }
    const double elapsed = seconds_since(t0);
    out.pass = out.pass && elapsed < kConvergenceBudgetSeconds;
    out.summary = fmt("beta in {0, 0.5, 2}, same seeds, %.1f s", elapsed);
    return out;
}

struct ReferenceRow {
    char panel;
    std::size_t n;
    double size, pr_y, pr_eps;
};

constexpr ReferenceRow kReferenceTable[] = {
    {'A', 20, 0.051, 0.632, 0.091}, {'A', 100, 0.049, 0.715, 0.008},
    {'B', 20, 0.140, 0.927, 0.688}, {'B', 100, 0.138, 0.998, 0.902},
    {'C', 20, 0.140, 0.743, 0.689}, {'C', 100, 0.138, 0.913, 0.902},
    {'D', 20, 0.051, 0.114, 0.091}, {'D', 100, 0.049, 0.009, 0.008},
    {'E', 20, 0.129, 0.672, 0.615}, {'E', 100, 0.130, 0.840, 0.826},
};

std::size_t compare_table(std::size_t outer, std::size_t perms, std::vector<std::string>& lines) {
    SimConfig cfg;
    cfg.replications = perms;
    cfg.seed = kSeed;
    cfg.workers = default_workers();
    std::size_t misses = 0;
    for (const auto& row : kReferenceTable) {
        const TableA1Result r = experiment_table_a1(panel_dgp(table_panel(row.panel), row.n), outer, cfg);
        const Proportion ours[] = {r.size, r.pr_gamma_y, r.pr_gamma_eps};
        const double reference[] = {row.size, row.pr_y, row.pr_eps};
        std::string line = fmt("%c N=%-3zu", row.panel, row.n);
        for (int k = 0; k < 3; ++k) {
            const double tol = std::max(kTableAbsTol, kTableSeMultiple * ours[k].std_error);
            const bool ok = std::abs(ours[k].value - reference[k]) <= tol;
            misses += ok ? 0 : 1;
            line += fmt("  %.3f vs %.3f (tol %.3f)%s", ours[k].value, reference[k], tol, ok ? "   " : " X ");
        }
        lines.push_back(line);
    }
    return misses;
}

// 5. Monte Carlo table at 2000 x 200.
Outcome table_reproduction() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    out.details.push_back("columns: size, Pr(Gamma_y > 0.1), Pr(Gamma_eps > 0.1); ours vs reference");
    const std::size_t misses = compare_table(2000, 200, out.details);
    const double elapsed = seconds_since(t0);
    out.pass = misses == 0;
    out.summary = fmt("2000 outer x 200 permutations: %zu of 30 cells outside max(%.2f, %.0f SE), %.0f s", misses,
                      kTableAbsTol, kTableSeMultiple, elapsed);

    // Informational only: the reference values' permutation count. Does not affect the verdict.
    std::vector<std::string> extra;
    const auto t1 = std::chrono::steady_clock::now();
    const std::size_t misses500 = compare_table(2000, 500, extra);
    out.details.push_back(fmt("info (not part of the verdict): 2000 outer x 500 permutations, %zu of 30 cells outside, %.0f s",
                              misses500, seconds_since(t1)));
    for (auto& l : extra) out.details.push_back("info " + l);
    return out;
}

// 6. y-fixed calibration under the null.
Outcome null_calibration() {
    Outcome out;
    // One sector per region (x iid across regions) and y iid N(0, 1).
    const std::size_t n = 1000;
    RandomStream rng(kSeed);
    RawDataset raw;
    raw.shares = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        raw.region_ids.push_back(std::to_string(i));
        raw.y.push_back(rng.normal());
        raw.shares(i, i) = 1.0;
    }
    const Dataset data = validate_dataset(std::move(raw));
    SimConfig cfg;
    cfg.replications = 10000;
    cfg.seed = kSeed;
    cfg.workers = default_workers();
    const SimReport r = run_y_fixed(data, cfg);
    const auto [lo, hi] = binomial_band(r.effective, 0.05);
    const double gamma = r.rate(Estimator::robust_hc1);
    out.pass = r.effective == 10000 && gamma >= lo && gamma <= hi;
    out.summary = fmt("N=1000, B=10000, robust-hc1: Gamma = %.4f, 99%% band [%.4f, %.4f]", gamma, lo, hi);
    return out;
}

// 7. Score aggregation vs group clustering.
Outcome score_cluster_equivalence() {
    Outcome out;
    RandomStream rng(kSeed);
    double worst = 0.0;
    for (int k = 0; k < 500; ++k) {
        const std::size_t f = 2 * (1 + rng.below(25));
        const std::size_t m = 1 + rng.below(10);
        if (f * m < 3) continue;
        const PartitionDesign design = PartitionDesign::random(f, m, rng);
        std::vector<double> y(design.units());
        const double scale = std::exp(2.0 * rng.normal());
        for (double& v : y) v = scale * rng.normal();
        const RegressionFit fit = ols_simple(y, design.unit_treatment());
        const double score = var_score_agg(fit, partition_to_shares(design), false).value;
        const double cluster = var_cluster(fit, design.group_labels(), ClusterFlavor::cr1).value;
        worst = std::max(worst, std::abs(score / cluster - score_to_cluster_dof_ratio(design.units())));
    }
    out.pass = worst <= kEquivalenceTol;
    out.summary = fmt("500 partition datasets: max |score/cluster - (N-2)/(N-1)| = %.3g (tol %.0e)", worst,
                      kEquivalenceTol);
    return out;
}

int run_cli(const std::string& args, const fs::path& out_file) {
    const std::string cmd = std::string(SSDIAG_CLI_PATH) + " " + args + " --out " + out_file.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 8. Byte-identical command output across reruns and worker counts.
Outcome determinism() {
    Outcome out;
    const fs::path dir = fs::temp_directory_path() / "ssdiag_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const Dataset fixture = partition_dataset(30, 4, 1.5, kSeed);
    std::ofstream(dir / "shares.csv") << io::write_shares_csv(fixture);
    std::ofstream(dir / "outcomes.csv") << io::write_outcomes_csv(fixture);
    const std::string data = " --shares " + (dir / "shares.csv").string() + " --outcomes " + (dir / "outcomes.csv").string();
    const std::pair<const char*, std::string> commands[] = {
        {"diagnose", "diagnose --perms 400" + data},
        {"mc-table", "mc-table --reps 40 --perms 40"},
        {"flag-curve", "flag-curve --reps 40 --perms 40"},
        {"analytic", "analytic --beta 0.5 --rho 0.25 --m 3"},
        {"oracle", "oracle --y 0.3,1.7,-2.2,4.1,0.9,-0.4,2.5,1.1"},
    };
    std::size_t runs = 0, mismatches = 0, failures = 0;
    for (const auto& [name, args] : commands) {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            std::string reference;
            for (unsigned workers : {1u, 4u, 8u}) {
                for (int rerun = 0; rerun < 2; ++rerun) {
                    const fs::path file = dir / "out.txt";
                    const int code = run_cli(std::string(args) + " --seed " + std::to_string(seed) + " --workers " +
                                                 std::to_string(workers),
                                             file);
                    ++runs;
                    if (code != 0) {
                        ++failures;
                        continue;
                    }
                    const std::string text = io::read_file(file);
                    if (reference.empty()) {
                        reference = text;
                    } else if (text != reference) {
                        ++mismatches;
                    }
                }
            }
        }
        out.details.push_back(fmt("%s: checked", name));
    }
    fs::remove_all(dir);
    out.pass = mismatches == 0 && failures == 0;
    out.summary = fmt("5 commands x 3 seeds x workers {1,4,8} x 2 reruns: %zu runs, %zu mismatches, %zu failed runs",
                      runs, mismatches, failures);
    return out;
}

// 9. Synthetic flagging curve.
Outcome flag_curve_sanity() {
    Outcome out;
    const RunConfig defaults;
    const SyntheticShares shares = make_synthetic_shares(defaults.regions, defaults.sectors, defaults.cluster_size,
                                                         defaults.sectors_per_region, kSeed);
    SimConfig cfg;
    cfg.replications = 200;
    cfg.seed = kSeed;
    cfg.workers = default_workers();
    const std::size_t reps = 1000;
    const auto points = experiment_flagging_curve(shares.shares, shares.clusters, defaults.gamma_grid, reps, cfg);
    for (const auto& p : points) {
        out.details.push_back(fmt("gamma=%-5g size %.3f  pr_flag_y %.3f  pr_flag_eps %.3f", p.gamma_sc, p.size.value,
                                  p.pr_flag_y.value, p.pr_flag_eps.value));
    }
    const auto [lo, hi] = binomial_band(reps, 0.05);
    const FlagCurvePoint& first = points.front();
    const FlagCurvePoint& last = points.back();
    const bool size_ok = first.size.value >= lo && first.size.value <= hi;
    auto rises = [](const Proportion& a, const Proportion& b) {
        return b.value - a.value >= kFlagCurveSeMultiple * std::hypot(a.std_error, b.std_error);
    };
    const bool y_ok = rises(first.pr_flag_y, last.pr_flag_y);
    const bool eps_ok = rises(first.pr_flag_eps, last.pr_flag_eps);
    out.pass = size_ok && y_ok && eps_ok;
    out.details.push_back(fmt("gamma=0 CRVE size %.3f in 99%% band [%.3f, %.3f]: %s", first.size.value, lo, hi,
                              size_ok ? "yes" : "NO"));
    out.details.push_back(fmt("pr_flag rise from gamma=0 to gamma=%g >= %.0f pooled SE: y %s, eps %s", last.gamma_sc,
                              kFlagCurveSeMultiple, y_ok ? "yes" : "NO", eps_ok ? "yes" : "NO"));
    out.summary = fmt("N=%zu, F=%zu, %zu outer x %zu draws", defaults.regions, defaults.sectors, reps, cfg.replications);
    return out;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria = {
        {1, "formula fidelity", formula_fidelity},
        {2, "oracle equivalence", oracle_equivalence},
        {3, "y-fixed ratio convergence", prop1_convergence},
        {4, "eps-fixed ratio independent of beta", propA2_beta_free},
        {5, "Monte Carlo table at desk scale", table_reproduction},
        {6, "calibration under the null", null_calibration},
        {7, "score/cluster equivalence", score_cluster_equivalence},
        {8, "determinism", determinism},
        {9, "flagging-curve sanity", flag_curve_sanity},
    };
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    bool all_pass = true;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.summary = std::string("exception: ") + e.what();
        }
        all_pass = all_pass && o.pass;
        std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.summary.c_str());
        for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
    }
    return all_pass ? 0 : 1;
}

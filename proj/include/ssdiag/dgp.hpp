#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdiag/core_data.hpp"
#include "ssdiag/error.hpp"
#include "ssdiag/estimators.hpp"
#include "ssdiag/parallel.hpp"
#include "ssdiag/rng.hpp"
#include "ssdiag/sim_engines.hpp"

namespace ssdiag {

/// Probability estimate with its Monte Carlo standard error sqrt(p(1-p)/reps).
struct Proportion {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t count = 0;
    std::size_t trials = 0;

    static Proportion from_counts(std::size_t count, std::size_t trials) {
        Proportion p;
        p.count = count;
        p.trials = trials;
        if (trials > 0) {
            p.value = static_cast<double>(count) / static_cast<double>(trials);
            p.std_error = std::sqrt(p.value * (1.0 - p.value) / static_cast<double>(trials));
        }
        return p;
    }
};

// ---------------------------------------------------------------------------
// Grouped (state-level) design

/// n_states states of per_state individuals, half the states treated.
/// Y(0) = omega * xi_s + eps_is, Y(1) = beta + het_loading * xi_s + Y(0),
/// with xi_s and eps_is iid N(0, 1).
struct GroupedDGP {
    std::size_t n_states = 20;
    std::size_t per_state = 10;
    double omega = 0.0;
    double beta = 0.0;
    double het_loading = 0.0;

    void validate() const {
        if (n_states < 2 || n_states % 2 != 0) throw ValidationError("n_states must be even and >= 2");
        if (per_state < 1) throw ValidationError("per_state must be >= 1");
        if (!(omega >= 0.0)) throw ValidationError("omega must be >= 0");
        if (!(het_loading >= 0.0)) throw ValidationError("het_loading must be >= 0");
        if (!std::isfinite(beta)) throw ValidationError("beta must be finite");
    }

    /// Superpopulation average effect; E[xi_s] = 0 so the loading drops out.
    double true_effect() const noexcept { return beta; }
};

struct GroupedDraw {
    std::vector<double> y;
    PartitionDesign design;
    double sate = 0.0;
};

/// State shocks, idiosyncratic errors and the assignment each come from their
/// own child stream, so panels that differ only in beta, omega or the loading
/// share the underlying normals.
inline GroupedDraw draw_grouped(const GroupedDGP& dgp, const RandomStream& rng) {
    dgp.validate();
    RandomStream xi_rng = rng.split(stream_tag::kStateShocks, 0);
    RandomStream eps_rng = rng.split(stream_tag::kIdiosyncratic, 0);
    RandomStream assign_rng = rng.split(stream_tag::kAssignment, 0);

    std::vector<double> xi(dgp.n_states);
    xi_rng.fill_normal(xi);
    PartitionDesign design = PartitionDesign::random(dgp.n_states, dgp.per_state, assign_rng);

    std::vector<double> y(design.units());
    double effect_sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t s = design.group_of(i);
        const double y0 = dgp.omega * xi[s] + eps_rng.normal();
        const double effect = dgp.beta + dgp.het_loading * xi[s];
        effect_sum += effect;
        y[i] = design.treated()[s] ? y0 + effect : y0;
    }
    const double sate = effect_sum / static_cast<double>(y.size());
    return {std::move(y), std::move(design), sate};
}

struct TablePanel {
    char id;
    std::string_view label;
    double beta;
    double omega;
    double het_loading;
};

inline constexpr TablePanel kTableA1Panels[] = {
    {'A', "positive treatment effect, no spatial correlation", 0.5, 0.0, 0.0},
    {'B', "positive treatment effect, spatial correlation", 0.5, 0.3, 0.0},
    {'C', "no treatment effect, spatial correlation", 0.0, 0.3, 0.0},
    {'D', "no treatment effect, no spatial correlation", 0.0, 0.0, 0.0},
    {'E', "heterogeneous treatment effects", 0.0, 0.0, 0.4},
};

inline const TablePanel& table_panel(char id) {
    for (const auto& p : kTableA1Panels) {
        if (p.id == id) return p;
    }
    throw ValidationError(std::string("unknown panel '") + id + "'");
}

inline GroupedDGP panel_dgp(const TablePanel& panel, std::size_t n_states, std::size_t per_state = 10) {
    return {n_states, per_state, panel.omega, panel.beta, panel.het_loading};
}

struct TableA1Result {
    Proportion size;          // rejection of the true null on the realized assignment
    Proportion pr_gamma_y;    // Pr(Gamma_y > tau)
    Proportion pr_gamma_eps;  // Pr(Gamma_eps > tau)
    std::vector<double> gamma_y;
    std::vector<double> gamma_eps;
};

/// Outer loop over data draws; for each draw, tests the true null once and
/// computes Gamma_y and Gamma_eps by permuting the state assignment
/// cfg.replications times. The first configured estimator is used throughout.
inline TableA1Result experiment_table_a1(const GroupedDGP& dgp, std::size_t outer_reps, const SimConfig& cfg) {
    dgp.validate();
    cfg.validate();
    if (outer_reps < 1) throw ValidationError("outer replications must be >= 1");
    const Estimator estimator = cfg.estimators.front();
    if (is_score_estimator(estimator)) throw ValidationError("score-aggregation is not defined for this experiment");

    SimConfig inner = cfg;
    inner.estimators = {estimator};
    inner.workers = 1;

    const RandomStream root(cfg.seed);
    std::vector<std::uint8_t> size_reject(outer_reps, 0);
    std::vector<double> gamma_y(outer_reps, 0.0);
    std::vector<double> gamma_eps(outer_reps, 0.0);

    parallel_for(outer_reps, cfg.workers, [&](std::size_t r) {
        const RandomStream outer = root.split(stream_tag::kOuterReplication, r);
        const GroupedDraw draw = draw_grouped(dgp, outer);
        const std::vector<double> x = draw.design.unit_treatment();
        const RegressionFit fit = ols_simple(draw.y, x);

        const std::vector<int> groups = draw.design.group_labels();
        const VarianceEstimate v = is_cluster_estimator(estimator)
                                       ? var_cluster(fit, groups, draw.design.groups(),
                                                     estimator == Estimator::crve ? ClusterFlavor::cr1 : ClusterFlavor::cr3)
                                       : var_robust(fit, estimator == Estimator::robust_hc1 ? RobustFlavor::hc1
                                                                                            : RobustFlavor::hc3);
        size_reject[r] = t_test(fit.slope, dgp.true_effect(), v, cfg.alpha).reject ? 1 : 0;

        const RandomStream perms = outer.split(stream_tag::kInnerSimulation, 0);
        gamma_y[r] =
            run_partition_permutation(draw.y, draw.design, OutcomeMode::y_fixed, std::nullopt, inner, perms, 1)
                .rate(estimator);
        gamma_eps[r] =
            run_partition_permutation(draw.y, draw.design, OutcomeMode::eps_fixed, fit.slope, inner, perms, 1)
                .rate(estimator);
    });

    std::size_t size_count = 0;
    std::size_t flag_y = 0;
    std::size_t flag_eps = 0;
    for (std::size_t r = 0; r < outer_reps; ++r) {
        size_count += size_reject[r];
        flag_y += gamma_y[r] > cfg.flag_threshold ? 1 : 0;
        flag_eps += gamma_eps[r] > cfg.flag_threshold ? 1 : 0;
    }
    return {Proportion::from_counts(size_count, outer_reps), Proportion::from_counts(flag_y, outer_reps),
            Proportion::from_counts(flag_eps, outer_reps), std::move(gamma_y), std::move(gamma_eps)};
}

/// A partition-design dataset with a homogeneous effect: y = beta * T + eps,
/// an independent placebo outcome, unit-level clusters and x_realized = T.
inline Dataset partition_dataset(std::size_t groups, std::size_t group_size, double beta, std::uint64_t seed) {
    if (!std::isfinite(beta)) throw ValidationError("beta must be finite");
    const RandomStream root = RandomStream(seed).split(stream_tag::kSynthetic, 1);
    RandomStream assign_rng = root.split(stream_tag::kAssignment, 0);
    RandomStream eps_rng = root.split(stream_tag::kIdiosyncratic, 0);
    RandomStream placebo_rng = root.split(stream_tag::kIdiosyncratic, 1);
    const PartitionDesign design = PartitionDesign::random(groups, group_size, assign_rng);
    const std::size_t n = design.units();

    RawDataset raw;
    raw.shares = partition_to_shares(design);
    raw.x_realized = design.unit_treatment();
    raw.y.resize(n);
    raw.y_placebo = std::vector<double>(n);
    raw.clusters = std::vector<long long>(n);
    const int width = static_cast<int>(std::to_string(n).size());
    for (std::size_t i = 0; i < n; ++i) {
        std::string id = std::to_string(i + 1);
        raw.region_ids.push_back("r" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id);
        raw.y[i] = beta * (*raw.x_realized)[i] + eps_rng.normal();
        (*raw.y_placebo)[i] = placebo_rng.normal();
        (*raw.clusters)[i] = static_cast<long long>(i);
    }
    return validate_dataset(std::move(raw));
}

// ---------------------------------------------------------------------------
// Flagging-probability design

/// Y* = Z + gamma_sc * sum_f w_if X*_f with Z, X* iid N(0, 1); the researcher
/// regresses Y* on X = sum_f w_if X_f with independent observed shocks X_f.
struct FlaggingDGP {
    DenseMatrix shares;
    double gamma_sc = 0.0;
};

struct FlaggingDraw {
    std::vector<double> y_star;
    std::vector<double> x;
};

inline FlaggingDraw draw_flagging(const FlaggingDGP& dgp, const RandomStream& rng) {
    const std::size_t n = dgp.shares.rows();
    const std::size_t f = dgp.shares.cols();
    if (n < 3 || f < 2) throw ValidationError("flagging design needs N >= 3 and F >= 2");
    RandomStream z_rng = rng.split(stream_tag::kLatent, 0);
    RandomStream hidden_rng = rng.split(stream_tag::kUnobservedShocks, 0);
    RandomStream observed_rng = rng.split(stream_tag::kObservedShocks, 0);

    std::vector<double> z(n);
    z_rng.fill_normal(z);
    std::vector<double> hidden(f);
    hidden_rng.fill_normal(hidden);
    std::vector<double> observed(f);
    observed_rng.fill_normal(observed);

    FlaggingDraw out{build_shift_share(dgp.shares, hidden), build_shift_share(dgp.shares, observed)};
    for (std::size_t i = 0; i < n; ++i) out.y_star[i] = z[i] + dgp.gamma_sc * out.y_star[i];
    return out;
}

struct SyntheticShares {
    DenseMatrix shares;
    std::vector<int> clusters;
};

/// Regions exposed to a few random sectors each, with clusters formed by
/// consecutive blocks of regions. Exposure overlaps cut across clusters, so
/// share-driven correlation is not absorbed by CRVE.
inline SyntheticShares make_synthetic_shares(std::size_t regions, std::size_t sectors, std::size_t cluster_size,
                                             std::size_t sectors_per_region, std::uint64_t seed) {
    if (regions < 3 || sectors < 2) throw ValidationError("synthetic shares need N >= 3 and F >= 2");
    if (cluster_size < 1 || regions / cluster_size < 2) throw ValidationError("synthetic shares need at least 2 clusters");
    if (sectors_per_region < 1 || sectors_per_region > sectors) {
        throw ValidationError("sectors per region must lie in [1, F]");
    }
    RandomStream rng = RandomStream(seed).split(stream_tag::kSynthetic, 0);
    SyntheticShares out{DenseMatrix(regions, sectors), std::vector<int>(regions)};
    std::vector<std::uint32_t> order(sectors);
    for (std::size_t i = 0; i < regions; ++i) {
        for (std::size_t f = 0; f < sectors; ++f) order[f] = static_cast<std::uint32_t>(f);
        double total = 0.0;
        for (std::size_t k = 0; k < sectors_per_region; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.below(sectors - k));
            std::swap(order[k], order[j]);
            const double w = 0.2 + 0.8 * rng.uniform();
            out.shares(i, order[k]) = w;
            total += w;
        }
        for (std::size_t k = 0; k < sectors_per_region; ++k) out.shares(i, order[k]) /= total;
        out.clusters[i] = static_cast<int>(std::min(i / cluster_size, regions / cluster_size - 1));
    }
    return out;
}

struct FlagCurvePoint {
    double gamma_sc = 0.0;
    Proportion size;          // CRVE rejection of the (true) zero-slope null
    Proportion pr_flag_y;     // Pr(Gamma_y > tau)
    Proportion pr_flag_eps;   // Pr(Gamma_eps > tau)
    double mean_slope = 0.0;
    double slope_std_error = 0.0;
};

/// For each gamma: outer draws of (Y*, X); per draw a CRVE test of a zero
/// slope and y-fixed and eps-fixed simulations with iid normal shocks.
/// Latent draws depend only on the outer index, so grid points are paired.
inline std::vector<FlagCurvePoint> experiment_flagging_curve(const DenseMatrix& shares, std::span<const int> clusters,
                                                             std::span<const double> gamma_grid,
                                                             std::size_t outer_reps, const SimConfig& cfg) {
    cfg.validate();
    if (outer_reps < 1) throw ValidationError("outer replications must be >= 1");
    if (gamma_grid.empty()) throw ValidationError("gamma grid must be non-empty");
    RawDataset raw;
    raw.region_ids.resize(shares.rows());
    for (std::size_t i = 0; i < shares.rows(); ++i) raw.region_ids[i] = std::to_string(i);
    raw.y.assign(shares.rows(), 0.0);
    raw.shares = shares;
    raw.clusters = std::vector<long long>(clusters.begin(), clusters.end());
    const Dataset structure = validate_dataset(std::move(raw));
    require_clusters(structure);

    SimConfig inner = cfg;
    inner.estimators = {Estimator::crve};
    inner.shock_law = ShockLaw::iid_standard_normal;
    inner.workers = 1;
    inner.exhaustive = false;

    const std::size_t n_grid = gamma_grid.size();
    const RandomStream root(cfg.seed);
    std::vector<std::uint8_t> size_reject(n_grid * outer_reps, 0);
    std::vector<std::uint8_t> flag_y(n_grid * outer_reps, 0);
    std::vector<std::uint8_t> flag_eps(n_grid * outer_reps, 0);
    std::vector<double> slopes(n_grid * outer_reps, 0.0);
    const std::vector<int>& labels = *structure.clusters;
    const std::size_t g = structure.cluster_count();

    parallel_for(outer_reps, cfg.workers, [&](std::size_t r) {
        const RandomStream outer = root.split(stream_tag::kOuterReplication, r);
        const RandomStream sims = outer.split(stream_tag::kInnerSimulation, 0);
        Dataset data = structure;
        for (std::size_t k = 0; k < n_grid; ++k) {
            const FlaggingDraw draw = draw_flagging({shares, gamma_grid[k]}, outer);
            const RegressionFit fit = ols_simple(draw.y_star, draw.x);
            const VarianceEstimate v = var_cluster(fit, labels, g, ClusterFlavor::cr1);
            const std::size_t slot = k * outer_reps + r;
            size_reject[slot] = t_test(fit.slope, 0.0, v, cfg.alpha).reject ? 1 : 0;
            slopes[slot] = fit.slope;

            data.y = draw.y_star;
            const double gy = detail::run_engine(detail::dataset_inputs(data, data.y), inner, SimMode::y_fixed, sims, 1)
                                  .rate(Estimator::crve);
            const std::vector<double> residualized = residualize(draw.y_star, draw.x, fit.slope);
            const double ge =
                detail::run_engine(detail::dataset_inputs(data, residualized), inner, SimMode::eps_fixed, sims, 1)
                    .rate(Estimator::crve);
            flag_y[slot] = gy > cfg.flag_threshold ? 1 : 0;
            flag_eps[slot] = ge > cfg.flag_threshold ? 1 : 0;
        }
    });

    std::vector<FlagCurvePoint> points;
    for (std::size_t k = 0; k < n_grid; ++k) {
        std::size_t sizes = 0, fy = 0, fe = 0;
        double mean = 0.0;
        for (std::size_t r = 0; r < outer_reps; ++r) {
            const std::size_t slot = k * outer_reps + r;
            sizes += size_reject[slot];
            fy += flag_y[slot];
            fe += flag_eps[slot];
            mean += slopes[slot];
        }
        mean /= static_cast<double>(outer_reps);
        double ss = 0.0;
        for (std::size_t r = 0; r < outer_reps; ++r) {
            const double d = slopes[k * outer_reps + r] - mean;
            ss += d * d;
        }
        const double se = outer_reps > 1 ? std::sqrt(ss / static_cast<double>(outer_reps - 1) /
                                                     static_cast<double>(outer_reps))
                                         : 0.0;
        points.push_back({gamma_grid[k], Proportion::from_counts(sizes, outer_reps),
                          Proportion::from_counts(fy, outer_reps), Proportion::from_counts(fe, outer_reps), mean, se});
    }
    return points;
}

}  // namespace ssdiag

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdiag/core_data.hpp"
#include "ssdiag/error.hpp"
#include "ssdiag/estimators.hpp"
#include "ssdiag/parallel.hpp"
#include "ssdiag/rng.hpp"

namespace ssdiag {

struct SimConfig {
    std::size_t replications = 200;
    ShockLaw shock_law = ShockLaw::iid_standard_normal;
    double alpha = 0.05;
    std::vector<Estimator> estimators{Estimator::robust_hc1};
    std::uint64_t seed = 0;
    double flag_threshold = 0.1;
    unsigned workers = 1;
    // Replace random draws by every balanced assignment (F <= 12 only).
    bool exhaustive = false;

    void validate() const {
        if (replications < 1) throw ValidationError("replications must be >= 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
        if (estimators.empty()) throw ValidationError("estimator set must be non-empty");
        if (!(flag_threshold >= 0.0 && flag_threshold <= 1.0)) throw ValidationError("flag threshold must lie in [0, 1]");
    }
};

enum class SimMode { y_fixed, eps_fixed, placebo, permutation };

inline std::string_view to_string(SimMode mode) {
    switch (mode) {
        case SimMode::y_fixed: return "y-fixed";
        case SimMode::eps_fixed: return "eps-fixed";
        case SimMode::placebo: return "placebo";
        case SimMode::permutation: return "permutation";
    }
    return "unknown";
}

struct EstimatorRate {
    Estimator estimator = Estimator::robust_hc1;
    std::size_t rejections = 0;
    double rate = 0.0;  // Gamma

    friend bool operator==(const EstimatorRate&, const EstimatorRate&) = default;
};

struct SimReport {
    SimMode mode = SimMode::y_fixed;
    std::uint64_t seed = 0;
    std::size_t replications = 0;
    std::size_t effective = 0;
    std::size_t skipped_degenerate = 0;
    std::vector<EstimatorRate> rates;

    const EstimatorRate& at(Estimator e) const {
        for (const auto& r : rates) {
            if (r.estimator == e) return r;
        }
        throw ValidationError("estimator '" + std::string(to_string(e)) + "' not in report");
    }
    double rate(Estimator e) const { return at(e).rate; }
    bool flagged(Estimator e, double threshold) const { return rate(e) > threshold; }

    friend bool operator==(const SimReport&, const SimReport&) = default;
};

/// All C(F, F/2) balanced 0/1 assignments in lexicographic order.
inline std::vector<std::vector<double>> enumerate_balanced_assignments(std::size_t sectors) {
    if (sectors % 2 != 0) throw ValidationError("balanced assignments need an even sector count");
    if (sectors > 12) throw BudgetError("exhaustive enumeration is limited to 12 sectors, got " + std::to_string(sectors));
    std::vector<double> current(sectors, 0.0);
    std::fill(current.begin() + static_cast<std::ptrdiff_t>(sectors / 2), current.end(), 1.0);
    std::vector<std::vector<double>> out;
    do {
        out.push_back(current);
    } while (std::next_permutation(current.begin(), current.end()));
    return out;
}

namespace detail {

/// Everything one replication needs besides its shock draw.
struct EngineInputs {
    std::span<const double> outcome;
    const DenseMatrix* shares = nullptr;  // required for dense exposure and score-agg
    std::optional<std::span<const int>> groups;  // partition: x_i = X_{group(i)}
    std::span<const int> clusters;
    std::size_t cluster_count = 0;
    std::size_t sectors = 0;
};

struct Workspace {
    std::vector<double> shocks;
    std::vector<double> regressor;
    std::vector<std::uint32_t> index_scratch;
    std::vector<double> score_scratch;
    RegressionFit fit;
};

inline VarianceEstimate estimate(Estimator e, const RegressionFit& fit, const EngineInputs& in,
                                 std::vector<double>* scratch) {
    switch (e) {
        case Estimator::robust_hc1: return var_robust(fit, RobustFlavor::hc1);
        case Estimator::robust_hc3: return var_robust(fit, RobustFlavor::hc3);
        case Estimator::crve: return var_cluster(fit, in.clusters, in.cluster_count, ClusterFlavor::cr1, scratch);
        case Estimator::crve_hc3: return var_cluster(fit, in.clusters, in.cluster_count, ClusterFlavor::cr3, scratch);
        case Estimator::score_agg: return var_score_agg(fit, *in.shares, false, scratch);
        case Estimator::score_agg_null: return var_score_agg(fit, *in.shares, true, scratch);
    }
    throw ValidationError("unknown estimator");
}

inline double estimator_dof(Estimator e, const EngineInputs& in) {
    const auto n = static_cast<double>(in.outcome.size());
    if (is_cluster_estimator(e)) return static_cast<double>(in.cluster_count) - 1.0;
    if (is_score_estimator(e)) return static_cast<double>(in.sectors) - 1.0;
    return n - 2.0;
}

inline void check_inputs(const EngineInputs& in, const SimConfig& cfg) {
    cfg.validate();
    for (Estimator e : cfg.estimators) {
        if (is_cluster_estimator(e) && in.cluster_count < 2) {
            throw ValidationError("cluster-robust estimator requested but fewer than 2 clusters are available");
        }
        if (is_score_estimator(e) && in.shares == nullptr) {
            throw ValidationError("score-aggregation estimator requires a share matrix");
        }
    }
    if (cfg.shock_law == ShockLaw::balanced_binary && in.sectors % 2 != 0) {
        throw ValidationError("balanced-binary shocks need an even sector count, got " + std::to_string(in.sectors));
    }
    if (in.outcome.size() < 3) throw ValidationError("need at least 3 units");
}

/// Holds `in.outcome` fixed, redraws shocks per replication and records which
/// estimators reject a zero slope. Replication b draws from
/// root.split(kShockDraws, b), or uses the b-th balanced assignment in
/// exhaustive mode.
inline SimReport run_engine(const EngineInputs& in, const SimConfig& cfg, SimMode mode, const RandomStream& root,
                            unsigned workers) {
    check_inputs(in, cfg);

    std::vector<std::vector<double>> assignments;
    std::size_t reps = cfg.replications;
    if (cfg.exhaustive) {
        if (cfg.shock_law != ShockLaw::balanced_binary) {
            throw ValidationError("exhaustive mode requires balanced-binary shocks");
        }
        assignments = enumerate_balanced_assignments(in.sectors);
        reps = assignments.size();
    }

    const std::size_t n_est = cfg.estimators.size();
    std::vector<RejectionRule> rules;
    rules.reserve(n_est);
    for (Estimator e : cfg.estimators) rules.emplace_back(cfg.alpha, estimator_dof(e, in));

    // Per replication: one byte per estimator, plus a skip marker.
    std::vector<std::uint8_t> rejected(reps * n_est, 0);
    std::vector<std::uint8_t> skipped(reps, 0);

    constexpr std::size_t kChunk = 32;
    const std::size_t chunks = (reps + kChunk - 1) / kChunk;
    const std::size_t n = in.outcome.size();

    parallel_for(chunks, workers, [&](std::size_t chunk) {
        Workspace ws;
        ws.shocks.resize(in.sectors);
        ws.regressor.resize(n);
        const std::size_t begin = chunk * kChunk;
        const std::size_t end = std::min(reps, begin + kChunk);
        for (std::size_t b = begin; b < end; ++b) {
            std::span<const double> shocks;
            if (cfg.exhaustive) {
                shocks = assignments[b];
            } else {
                RandomStream rng = root.split(stream_tag::kShockDraws, b);
                draw_shocks_into(rng, cfg.shock_law, ws.shocks, ws.index_scratch);
                shocks = ws.shocks;
            }
            if (in.groups) {
                const auto& g = *in.groups;
                for (std::size_t i = 0; i < n; ++i) ws.regressor[i] = shocks[static_cast<std::size_t>(g[i])];
            } else {
                build_shift_share_into(*in.shares, shocks, ws.regressor);
            }
            try {
                ols_simple_into(in.outcome, ws.regressor, ws.fit);
                std::uint8_t* row = rejected.data() + b * n_est;
                for (std::size_t k = 0; k < n_est; ++k) {
                    const VarianceEstimate v = estimate(cfg.estimators[k], ws.fit, in, &ws.score_scratch);
                    row[k] = rules[k].rejects(ws.fit.slope, 0.0, v.value) ? 1 : 0;
                }
            } catch (const DegeneracyError&) {
                skipped[b] = 1;
                std::fill_n(rejected.data() + b * n_est, n_est, std::uint8_t{0});
            }
        }
    });

    SimReport report;
    report.mode = mode;
    report.seed = cfg.seed;
    report.replications = reps;
    for (std::uint8_t s : skipped) report.skipped_degenerate += s;
    report.effective = reps - report.skipped_degenerate;
    for (std::size_t k = 0; k < n_est; ++k) {
        EstimatorRate r{cfg.estimators[k], 0, 0.0};
        for (std::size_t b = 0; b < reps; ++b) r.rejections += rejected[b * n_est + k];
        r.rate = report.effective > 0 ? static_cast<double>(r.rejections) / static_cast<double>(report.effective) : 0.0;
        report.rates.push_back(r);
    }
    return report;
}

inline EngineInputs dataset_inputs(const Dataset& data, std::span<const double> outcome) {
    EngineInputs in;
    in.outcome = outcome;
    in.shares = &data.shares;
    in.sectors = data.sectors();
    if (data.clusters) {
        in.clusters = *data.clusters;
        in.cluster_count = data.cluster_count();
    }
    return in;
}

}  // namespace detail

/// Variance of the slope for one estimator on a dataset's structure.
inline VarianceEstimate estimate_variance(Estimator e, const RegressionFit& fit, const Dataset& data) {
    if (is_cluster_estimator(e)) require_clusters(data);
    const auto in = detail::dataset_inputs(data, data.y);
    return detail::estimate(e, fit, in, nullptr);
}

/// Holds y and the share matrix fixed; redraws sector shocks.
inline SimReport run_y_fixed(const Dataset& data, const SimConfig& cfg) {
    return detail::run_engine(detail::dataset_inputs(data, data.y), cfg, SimMode::y_fixed, RandomStream(cfg.seed),
                              cfg.workers);
}

/// Residualized outcomes y - beta_hat * x held fixed.
inline std::vector<double> residualize(std::span<const double> y, std::span<const double> x, double beta_hat) {
    if (x.size() != y.size()) throw ValidationError("realized regressor length does not match outcomes");
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] - beta_hat * x[i];
    return out;
}

inline SimReport run_eps_fixed(const Dataset& data, std::span<const double> x_realized, double beta_hat,
                               const SimConfig& cfg) {
    if (!std::isfinite(beta_hat)) throw ValidationError("beta_hat must be finite");
    const std::vector<double> residualized = residualize(data.y, x_realized, beta_hat);
    return detail::run_engine(detail::dataset_inputs(data, residualized), cfg, SimMode::eps_fixed,
                              RandomStream(cfg.seed), cfg.workers);
}

inline SimReport run_placebo(const Dataset& data, const SimConfig& cfg) {
    if (!data.y_placebo) throw ValidationError("missing placebo column");
    return detail::run_engine(detail::dataset_inputs(data, *data.y_placebo), cfg, SimMode::placebo,
                              RandomStream(cfg.seed), cfg.workers);
}

/// Permutes the group-level treatment of a partition design, holding y (or
/// y - beta_hat * x) fixed. Cluster estimators cluster at the group level.
inline SimReport run_partition_permutation(std::span<const double> y, const PartitionDesign& design, OutcomeMode mode,
                                           std::optional<double> beta_hat, const SimConfig& cfg,
                                           const RandomStream& root, unsigned workers) {
    if (y.size() != design.units()) {
        throw ValidationError("outcome length " + std::to_string(y.size()) + " does not match design with " +
                              std::to_string(design.units()) + " units");
    }
    if (mode == OutcomeMode::eps_fixed && !beta_hat) throw ValidationError("eps-fixed mode requires beta_hat");
    if (mode == OutcomeMode::y_fixed && beta_hat) throw ValidationError("beta_hat is only used in eps-fixed mode");

    std::vector<double> outcome(y.begin(), y.end());
    if (mode == OutcomeMode::eps_fixed) outcome = residualize(y, design.unit_treatment(), *beta_hat);

    const std::vector<int> groups = design.group_labels();
    std::optional<DenseMatrix> shares;
    const bool needs_shares = std::any_of(cfg.estimators.begin(), cfg.estimators.end(), is_score_estimator);
    if (needs_shares) shares = partition_to_shares(design);

    detail::EngineInputs in;
    in.outcome = outcome;
    in.shares = shares ? &*shares : nullptr;
    in.groups = std::span<const int>(groups);
    in.clusters = groups;
    in.cluster_count = design.groups();
    in.sectors = design.groups();

    SimConfig permuted = cfg;
    permuted.shock_law = ShockLaw::balanced_binary;
    return detail::run_engine(in, permuted, SimMode::permutation, root, workers);
}

inline SimReport run_partition_permutation(std::span<const double> y, const PartitionDesign& design, OutcomeMode mode,
                                           std::optional<double> beta_hat, const SimConfig& cfg) {
    return run_partition_permutation(y, design, mode, beta_hat, cfg, RandomStream(cfg.seed), cfg.workers);
}

}  // namespace ssdiag

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssdiag/core_data.hpp"
#include "ssdiag/error.hpp"
#include "ssdiag/estimators.hpp"
#include "ssdiag/parallel.hpp"
#include "ssdiag/rng.hpp"

namespace ssdiag {

/// Stylized partition model: effect beta, error variance sigma2,
/// within-group error covariance rho, group size m.
struct StylizedParams {
    double beta = 0.0;
    double sigma2 = 1.0;
    double rho = 0.0;
    std::size_t m = 1;

    void validate() const {
        if (!std::isfinite(beta) || !std::isfinite(sigma2) || !std::isfinite(rho)) {
            throw ValidationError("stylized parameters must be finite");
        }
        if (!(sigma2 > 0.0)) throw ValidationError("sigma2 must be positive");
        if (m < 1) throw ValidationError("group size m must be >= 1");
        if (rho > sigma2) throw ValidationError("infeasible rho: covariance exceeds variance");
        if (m > 1 && rho < -sigma2 / static_cast<double>(m - 1)) {
            throw ValidationError("infeasible rho: within-group covariance matrix is not positive semidefinite");
        }
    }
};

/// Almost-sure limit of V*_robust / V*_true under y-fixed resampling:
/// (beta^2 + 4 sigma2) / (m beta^2 + 4 sigma2 + 4 (m - 1) rho).
inline double prop1_ratio_limit(const StylizedParams& p) {
    p.validate();
    const double b2 = p.beta * p.beta;
    const auto m = static_cast<double>(p.m);
    const double denominator = m * b2 + 4.0 * p.sigma2 + 4.0 * (m - 1.0) * p.rho;
    if (!(denominator > 0.0)) throw DegeneracyError("nonpositive denominator in variance-ratio limit");
    return (b2 + 4.0 * p.sigma2) / denominator;
}

/// Limit of the same ratio under eps-fixed resampling: sigma2 / (sigma2 + (m - 1) rho).
/// Never reads p.beta.
inline double propA2_ratio_limit(const StylizedParams& p) {
    p.validate();
    const double denominator = p.sigma2 + (static_cast<double>(p.m) - 1.0) * p.rho;
    if (!(denominator > 0.0)) throw DegeneracyError("nonpositive denominator in variance-ratio limit");
    return p.sigma2 / denominator;
}

namespace detail {

inline void require_design_match(std::span<const double> y, const PartitionDesign& design) {
    if (y.size() != design.units()) {
        throw ValidationError("outcome length " + std::to_string(y.size()) + " does not match design with " +
                              std::to_string(design.units()) + " units");
    }
}

}  // namespace detail

/// [4 / (F (F - 2))] * sum_f (ybar_f - ybar)^2, the randomization variance of
/// the difference in means under group-level assignment.
inline double randomization_variance_true(std::span<const double> y, const PartitionDesign& design) {
    detail::require_design_match(y, design);
    const std::size_t f = design.groups();
    if (f <= 2) throw ValidationError("randomization variance needs more than 2 groups");
    const std::size_t m = design.group_size();
    const double grand = detail::anchored_mean(y);
    double acc = 0.0;
    for (std::size_t g = 0; g < f; ++g) {
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) sum += y[g * m + k];
        const double d = sum / static_cast<double>(m) - grand;
        acc += d * d;
    }
    const auto ff = static_cast<double>(f);
    return 4.0 / (ff * (ff - 2.0)) * acc;
}

/// [4 / (N (N - 2))] * sum_i (y_i - ybar)^2, the same variance had treatment
/// been assigned unit by unit.
inline double randomization_variance_robust(std::span<const double> y, const PartitionDesign& design) {
    detail::require_design_match(y, design);
    const std::size_t n = y.size();
    if (n <= 2) throw ValidationError("randomization variance needs more than 2 units");
    const double grand = detail::anchored_mean(y);
    double acc = 0.0;
    for (double v : y) {
        const double d = v - grand;
        acc += d * d;
    }
    const auto nn = static_cast<double>(n);
    return 4.0 / (nn * (nn - 2.0)) * acc;
}

struct AssignmentMoments {
    double mean = 0.0;
    double variance = 0.0;  // population variance over assignments
    std::size_t assignments = 0;
};

inline constexpr std::uint64_t kEnumerationBudget = 1'000'000;

inline std::uint64_t binomial_coefficient(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t out = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // Exact: out * (n - k + i) is divisible by i at every step.
        const __uint128_t next = static_cast<__uint128_t>(out) * (n - k + i) / i;
        if (next > UINT64_MAX) return UINT64_MAX;
        out = static_cast<std::uint64_t>(next);
    }
    return out;
}

/// Exact randomization distribution of the treated-minus-control difference
/// in unit means, by brute force over every balanced group assignment.
inline AssignmentMoments enumerate_assignment_variance(std::span<const double> y, const PartitionDesign& design) {
    detail::require_design_match(y, design);
    const std::size_t f = design.groups();
    if (f % 2 != 0) throw ValidationError("enumeration needs an even group count");
    const std::uint64_t count = binomial_coefficient(f, f / 2);
    if (count > kEnumerationBudget) {
        throw BudgetError("enumeration budget exceeded: C(" + std::to_string(f) + ", " + std::to_string(f / 2) +
                          ") = " + std::to_string(count) + " > " + std::to_string(kEnumerationBudget));
    }
    const std::size_t m = design.group_size();
    std::vector<double> group_sum(f, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        group_sum[i / m] += y[i];
        total += y[i];
    }
    const double half_units = static_cast<double>(y.size()) / 2.0;

    // Walk all F/2-subsets with a combination index vector.
    std::vector<std::size_t> pick(f / 2);
    for (std::size_t k = 0; k < pick.size(); ++k) pick[k] = k;
    std::vector<double> estimates;
    estimates.reserve(static_cast<std::size_t>(count));
    for (;;) {
        double treated = 0.0;
        for (std::size_t g : pick) treated += group_sum[g];
        estimates.push_back(treated / half_units - (total - treated) / half_units);

        std::size_t k = pick.size();
        while (k > 0 && pick[k - 1] == f - pick.size() + (k - 1)) --k;
        if (k == 0) break;
        ++pick[k - 1];
        for (std::size_t j = k; j < pick.size(); ++j) pick[j] = pick[j - 1] + 1;
    }

    AssignmentMoments out;
    out.assignments = estimates.size();
    double sum = 0.0;
    for (double e : estimates) sum += e;
    out.mean = sum / static_cast<double>(estimates.size());
    double ss = 0.0;
    for (double e : estimates) ss += (e - out.mean) * (e - out.mean);
    out.variance = ss / static_cast<double>(estimates.size());
    return out;
}

/// Draws equicorrelated errors for F groups of m units: variance sigma2,
/// within-group covariance rho.
inline void draw_equicorrelated_errors(const StylizedParams& p, std::size_t groups, RandomStream& rng,
                                       std::span<double> out) {
    const std::size_t m = p.m;
    if (out.size() != groups * m) throw ValidationError("error buffer does not match F * m");
    if (p.rho >= 0.0) {
        const double common = std::sqrt(p.rho);
        const double own = std::sqrt(p.sigma2 - p.rho);
        for (std::size_t g = 0; g < groups; ++g) {
            const double eta = rng.normal();
            for (std::size_t k = 0; k < m; ++k) out[g * m + k] = common * eta + own * rng.normal();
        }
    } else {
        // Symmetric square root of (sigma2 - rho) I + rho J.
        const double a = p.sigma2 - p.rho;
        const double root_a = std::sqrt(a);
        const double shift = std::sqrt(std::max(0.0, a + static_cast<double>(m) * p.rho)) - root_a;
        for (std::size_t g = 0; g < groups; ++g) {
            double mean = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                out[g * m + k] = rng.normal();
                mean += out[g * m + k];
            }
            mean /= static_cast<double>(m);
            for (std::size_t k = 0; k < m; ++k) out[g * m + k] = root_a * out[g * m + k] + shift * mean;
        }
    }
}

struct ConvergenceRow {
    std::size_t groups = 0;
    double mean_ratio = 0.0;
    double std_error = 0.0;  // of the mean over replications
    double limit = 0.0;
    std::size_t replications = 0;
};

/// For each F, draws y = beta * x + eps on a random balanced assignment,
/// evaluates V*_robust / V*_true on the held-fixed outcome (y itself, or
/// y - beta_hat x with beta_hat the OLS slope) and averages over replications.
/// The limit column is prop1_ratio_limit or propA2_ratio_limit.
inline std::vector<ConvergenceRow> ratio_convergence_experiment(const StylizedParams& p,
                                                                std::span<const std::size_t> group_grid,
                                                                std::size_t replications, std::uint64_t seed,
                                                                OutcomeMode mode = OutcomeMode::y_fixed,
                                                                unsigned workers = 1) {
    p.validate();
    if (replications < 1) throw ValidationError("replications must be >= 1");
    const RandomStream root(seed);
    std::vector<ConvergenceRow> rows;
    for (std::size_t gi = 0; gi < group_grid.size(); ++gi) {
        const std::size_t f = group_grid[gi];
        if (f < 4 || f % 2 != 0) throw ValidationError("group counts must be even and >= 4");
        const RandomStream grid_root = root.split(stream_tag::kGridPoint, f);
        std::vector<double> ratios(replications);
        parallel_for(replications, workers, [&](std::size_t r) {
            RandomStream rng = grid_root.split(stream_tag::kOuterReplication, r);
            RandomStream assign_rng = rng.split(stream_tag::kAssignment, 0);
            RandomStream error_rng = rng.split(stream_tag::kIdiosyncratic, 0);
            const PartitionDesign design = PartitionDesign::random(f, p.m, assign_rng);
            std::vector<double> y(design.units());
            draw_equicorrelated_errors(p, f, error_rng, y);
            const std::vector<double> x = design.unit_treatment();
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += p.beta * x[i];
            if (mode == OutcomeMode::eps_fixed) {
                const double beta_hat = ols_simple(y, x).slope;
                for (std::size_t i = 0; i < y.size(); ++i) y[i] -= beta_hat * x[i];
            }
            ratios[r] = randomization_variance_robust(y, design) / randomization_variance_true(y, design);
        });
        double mean = 0.0;
        for (double v : ratios) mean += v;
        mean /= static_cast<double>(replications);
        double ss = 0.0;
        for (double v : ratios) ss += (v - mean) * (v - mean);
        const double se = replications > 1 ? std::sqrt(ss / static_cast<double>(replications - 1) /
                                                        static_cast<double>(replications))
                                            : 0.0;
        rows.push_back({f, mean, se, mode == OutcomeMode::y_fixed ? prop1_ratio_limit(p) : propA2_ratio_limit(p),
                        replications});
    }
    return rows;
}

}  // namespace ssdiag

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ssdiag/error.hpp"
#include "ssdiag/matrix.hpp"

namespace ssdiag {

/// Bivariate OLS of y on (1, x).
struct RegressionFit {
    double intercept = 0.0;
    double slope = 0.0;
    std::vector<double> residuals;
    std::vector<double> regressor_demeaned;
    double regressor_demeaned_ssq = 0.0;
    std::vector<double> leverages;

    std::size_t size() const noexcept { return residuals.size(); }
};

class DegenerateRegressor : public DegeneracyError {
public:
    DegenerateRegressor() : DegeneracyError("degenerate regressor: x has no variation") {}
};

namespace detail {

// Mean computed relative to the first element, so a constant vector has a
// mean equal to that constant bit-for-bit and demeans to exact zeros.
inline double anchored_mean(std::span<const double> v) noexcept {
    const double anchor = v[0];
    double acc = 0.0;
    for (double x : v) acc += x - anchor;
    return anchor + acc / static_cast<double>(v.size());
}

}  // namespace detail

inline void ols_simple_into(std::span<const double> y, std::span<const double> x, RegressionFit& fit) {
    const std::size_t n = y.size();
    if (x.size() != n) {
        throw ValidationError("dimension mismatch: y has length " + std::to_string(n) + ", x has length " +
                              std::to_string(x.size()));
    }
    if (n < 3) throw ValidationError("regression needs at least 3 observations");

    const double xbar = detail::anchored_mean(x);
    const double ybar = detail::anchored_mean(y);
    fit.regressor_demeaned.resize(n);
    fit.residuals.resize(n);
    fit.leverages.resize(n);

    double sxx = 0.0;
    double sxy = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xd = x[i] - xbar;
        fit.regressor_demeaned[i] = xd;
        sxx += xd * xd;
        sxy += xd * (y[i] - ybar);
        scale += x[i] * x[i];
    }
    if (!(sxx > 1e-12 * scale)) throw DegenerateRegressor();

    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    fit.regressor_demeaned_ssq = sxx;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double xd = fit.regressor_demeaned[i];
        fit.residuals[i] = (y[i] - ybar) - fit.slope * xd;
        fit.leverages[i] = inv_n + xd * xd / sxx;
    }
}

inline RegressionFit ols_simple(std::span<const double> y, std::span<const double> x) {
    RegressionFit fit;
    ols_simple_into(y, x, fit);
    return fit;
}

enum class Estimator {
    robust_hc1,
    robust_hc3,
    crve,
    crve_hc3,
    score_agg,
    score_agg_null,
};

inline constexpr Estimator kAllEstimators[] = {Estimator::robust_hc1, Estimator::robust_hc3, Estimator::crve,
                                               Estimator::crve_hc3,   Estimator::score_agg,  Estimator::score_agg_null};

inline std::string_view to_string(Estimator e) {
    switch (e) {
        case Estimator::robust_hc1: return "robust-hc1";
        case Estimator::robust_hc3: return "robust-hc3";
        case Estimator::crve: return "crve";
        case Estimator::crve_hc3: return "crve-hc3";
        case Estimator::score_agg: return "score-agg";
        case Estimator::score_agg_null: return "score-agg-null";
    }
    return "unknown";
}

inline Estimator parse_estimator(std::string_view name) {
    for (Estimator e : kAllEstimators) {
        if (to_string(e) == name) return e;
    }
    throw ValidationError("unknown estimator '" + std::string(name) + "'");
}

inline bool is_cluster_estimator(Estimator e) noexcept {
    return e == Estimator::crve || e == Estimator::crve_hc3;
}

inline bool is_score_estimator(Estimator e) noexcept {
    return e == Estimator::score_agg || e == Estimator::score_agg_null;
}

/// Estimated variance of the slope plus the degrees of freedom of its
/// Student-t reference distribution.
struct VarianceEstimate {
    Estimator estimator = Estimator::robust_hc1;
    double value = 0.0;
    double dof = 1.0;
};

enum class RobustFlavor { hc1, hc3 };
enum class ClusterFlavor { cr1, cr3 };

namespace detail {

inline double leverage_deflator(double h) {
    if (h >= 1.0 - 1e-12) throw DegeneracyError("perfect-leverage point");
    return 1.0 / (1.0 - h);
}

}  // namespace detail

/// hc1: N/(N-2) * sum x~^2 e^2 / (sum x~^2)^2.
/// hc3: residuals deflated by (1 - h_ii), no extra factor. dof = N - 2.
inline VarianceEstimate var_robust(const RegressionFit& fit, RobustFlavor flavor) {
    const std::size_t n = fit.size();
    double meat = 0.0;
    if (flavor == RobustFlavor::hc1) {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = fit.regressor_demeaned[i] * fit.residuals[i];
            meat += s * s;
        }
        meat *= static_cast<double>(n) / static_cast<double>(n - 2);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double s = fit.regressor_demeaned[i] * fit.residuals[i] * detail::leverage_deflator(fit.leverages[i]);
            meat += s * s;
        }
    }
    const double bread = fit.regressor_demeaned_ssq;
    return {flavor == RobustFlavor::hc1 ? Estimator::robust_hc1 : Estimator::robust_hc3, meat / (bread * bread),
            static_cast<double>(n) - 2.0};
}

/// Cluster-robust variance with labels 0..G-1.
/// value = [G/(G-1)] [(N-1)/(N-2)] sum_g S_g^2 / (sum x~^2)^2, dof = G - 1.
/// cr3 deflates each residual by (1 - h_ii) inside S_g; the full block
/// inverse of the textbook CR3 is not used.
inline VarianceEstimate var_cluster(const RegressionFit& fit, std::span<const int> clusters, std::size_t cluster_count,
                                    ClusterFlavor flavor, std::vector<double>* scratch = nullptr) {
    const std::size_t n = fit.size();
    if (clusters.size() != n) throw ValidationError("cluster labels do not match the fit length");
    if (cluster_count < 2) throw ValidationError("cluster-robust variance needs at least 2 clusters");
    std::vector<double> local;
    std::vector<double>& scores = scratch ? *scratch : local;
    scores.assign(cluster_count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = fit.regressor_demeaned[i] * fit.residuals[i];
        if (flavor == ClusterFlavor::cr3) s *= detail::leverage_deflator(fit.leverages[i]);
        scores[static_cast<std::size_t>(clusters[i])] += s;
    }
    double meat = 0.0;
    for (double s : scores) meat += s * s;
    const auto g = static_cast<double>(cluster_count);
    const auto nn = static_cast<double>(n);
    const double factor = g / (g - 1.0) * (nn - 1.0) / (nn - 2.0);
    const double bread = fit.regressor_demeaned_ssq;
    return {flavor == ClusterFlavor::cr1 ? Estimator::crve : Estimator::crve_hc3, factor * meat / (bread * bread),
            g - 1.0};
}

inline VarianceEstimate var_cluster(const RegressionFit& fit, std::span<const int> clusters, ClusterFlavor flavor) {
    std::size_t g = 0;
    for (int c : clusters) {
        if (c < 0) throw ValidationError("cluster labels must be non-negative");
        g = std::max(g, static_cast<std::size_t>(c) + 1);
    }
    return var_cluster(fit, clusters, g, flavor);
}

/// Score-aggregation (shock-level) variance. Sector scores
/// R_f = sum_i w_if x~_i r_i with r = OLS residuals, or r_i = y_i - ybar when
/// the null of a zero slope is imposed. value = [F/(F-1)] sum_f R_f^2 /
/// (sum x~^2)^2, dof = F - 1.
///
/// This is the form that coincides with group-clustered CRVE in a partition
/// design up to the ratio of small-sample factors, (N-2)/(N-1). For general
/// share matrices it is an approximation of the shock-level estimators in the
/// shift-share literature, not a reimplementation of them.
inline VarianceEstimate var_score_agg(const RegressionFit& fit, const DenseMatrix& shares, bool null_imposed,
                                      std::vector<double>* scratch = nullptr) {
    const std::size_t n = fit.size();
    const std::size_t f = shares.cols();
    if (shares.rows() != n) throw ValidationError("share matrix rows do not match the fit length");
    if (f < 2) throw ValidationError("score aggregation needs at least 2 sectors");
    std::vector<double> local;
    std::vector<double>& scores = scratch ? *scratch : local;
    scores.assign(f, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double xd = fit.regressor_demeaned[i];
        const double r = null_imposed ? fit.residuals[i] + fit.slope * xd : fit.residuals[i];
        const double u = xd * r;
        if (u == 0.0) continue;
        const auto w = shares.row(i);
        for (std::size_t k = 0; k < f; ++k) scores[k] += w[k] * u;
    }
    double meat = 0.0;
    for (double s : scores) meat += s * s;
    const auto ff = static_cast<double>(f);
    const double bread = fit.regressor_demeaned_ssq;
    return {null_imposed ? Estimator::score_agg_null : Estimator::score_agg, ff / (ff - 1.0) * meat / (bread * bread),
            ff - 1.0};
}

/// Ratio var_score_agg / var_cluster(cr1, clusters = groups) in a partition
/// design with N units (G = F).
inline double score_to_cluster_dof_ratio(std::size_t units) {
    const auto n = static_cast<double>(units);
    return (n - 2.0) / (n - 1.0);
}

struct TTest {
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
    bool degenerate = false;
};

/// Two-sided Student-t p-value.
inline double student_t_two_sided_p(double statistic, double dof) {
    if (std::isinf(statistic)) return 0.0;
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(statistic)));
}

inline double student_t_critical(double alpha, double dof) {
    boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
}

inline TTest t_test(double slope, double null_value, const VarianceEstimate& variance, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("significance level must lie in (0, 1)");
    if (variance.dof < 1.0) throw ValidationError("degrees of freedom must be at least 1");
    TTest out;
    const double diff = slope - null_value;
    if (diff == 0.0) return out;
    if (!(variance.value > 0.0)) {
        out.statistic = diff > 0 ? INFINITY : -INFINITY;
        out.p_value = 0.0;
        out.reject = true;
        out.degenerate = true;
        return out;
    }
    out.statistic = diff / std::sqrt(variance.value);
    out.p_value = student_t_two_sided_p(out.statistic, variance.dof);
    out.reject = out.p_value <= alpha;
    return out;
}

/// Rejection via a precomputed critical value; equivalent to t_test's
/// p <= alpha rule and cheaper inside simulation loops.
class RejectionRule {
public:
    RejectionRule(double alpha, double dof) : alpha_(alpha), dof_(dof), critical_(student_t_critical(alpha, dof)) {}

    double dof() const noexcept { return dof_; }
    double critical() const noexcept { return critical_; }

    bool rejects(double slope, double null_value, double variance) const noexcept {
        const double diff = slope - null_value;
        if (diff == 0.0) return false;
        if (!(variance > 0.0)) return true;
        return std::fabs(diff) / std::sqrt(variance) >= critical_;
    }

private:
    double alpha_;
    double dof_;
    double critical_;
};

}  // namespace ssdiag

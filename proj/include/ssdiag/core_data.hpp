#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdiag/error.hpp"
#include "ssdiag/matrix.hpp"
#include "ssdiag/rng.hpp"

namespace ssdiag {

/// Unvalidated dataset fields as delivered by ingestion.
struct RawDataset {
    std::vector<std::string> region_ids;
    std::vector<double> y;
    DenseMatrix shares;
    std::optional<std::vector<long long>> clusters;
    std::optional<std::vector<double>> y_placebo;
    std::optional<std::vector<double>> x_realized;
};

/// The fixed conditioning set of a shift-share design: outcomes, the N x F
/// share matrix and (optionally) cluster labels, placebo outcome and the
/// realized shift-share regressor. Cluster labels are contiguous 0..G-1.
struct Dataset {
    std::vector<std::string> region_ids;
    std::vector<double> y;
    DenseMatrix shares;
    std::optional<std::vector<int>> clusters;
    std::optional<std::vector<double>> y_placebo;
    std::optional<std::vector<double>> x_realized;

    std::size_t regions() const noexcept { return y.size(); }
    std::size_t sectors() const noexcept { return shares.cols(); }
    std::size_t cluster_count() const noexcept {
        if (!clusters || clusters->empty()) return 0;
        return static_cast<std::size_t>(*std::max_element(clusters->begin(), clusters->end())) + 1;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline void require_finite(std::span<const double> v, std::string_view what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw ValidationError("non-finite " + std::string(what) + " at row " + std::to_string(i));
        }
    }
}

inline void require_length(std::size_t got, std::size_t want, std::string_view what) {
    if (got != want) {
        throw ValidationError("dimension mismatch: " + std::string(what) + " has length " +
                              std::to_string(got) + ", expected " + std::to_string(want));
    }
}

}  // namespace detail

/// Relabels arbitrary integer labels to 0..G-1 in ascending label order.
inline std::vector<int> relabel_contiguous(std::span<const long long> labels) {
    std::map<long long, int> index;
    for (long long label : labels) index.emplace(label, 0);
    int next = 0;
    for (auto& [label, id] : index) id = next++;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = index.at(labels[i]);
    return out;
}

inline Dataset validate_dataset(RawDataset raw) {
    const std::size_t n = raw.y.size();
    if (n < 3) throw ValidationError("need at least 3 regions, got " + std::to_string(n));
    detail::require_length(raw.shares.rows(), n, "shares");
    detail::require_length(raw.region_ids.size(), n, "region_ids");
    if (raw.shares.cols() < 2) {
        throw ValidationError("need at least 2 sectors, got " + std::to_string(raw.shares.cols()));
    }
    detail::require_finite(raw.y, "outcome");
    for (std::size_t i = 0; i < n; ++i) {
        bool positive = false;
        for (double w : raw.shares.row(i)) {
            if (!std::isfinite(w)) throw ValidationError("non-finite share in row " + std::to_string(i));
            if (w < 0.0) throw ValidationError("negative share in row " + std::to_string(i));
            positive = positive || w > 0.0;
        }
        if (!positive) throw ValidationError("degenerate exposure row " + std::to_string(i));
    }
    if (raw.y_placebo) {
        detail::require_length(raw.y_placebo->size(), n, "y_placebo");
        detail::require_finite(*raw.y_placebo, "placebo outcome");
    }
    if (raw.x_realized) {
        detail::require_length(raw.x_realized->size(), n, "x_realized");
        detail::require_finite(*raw.x_realized, "realized regressor");
    }

    Dataset out;
    if (raw.clusters) {
        detail::require_length(raw.clusters->size(), n, "clusters");
        out.clusters = relabel_contiguous(*raw.clusters);
    }
    out.region_ids = std::move(raw.region_ids);
    out.y = std::move(raw.y);
    out.shares = std::move(raw.shares);
    out.y_placebo = std::move(raw.y_placebo);
    out.x_realized = std::move(raw.x_realized);
    return out;
}

/// Re-validation of an already valid dataset; returns an identical copy.
inline Dataset validate_dataset(const Dataset& data) {
    RawDataset raw{data.region_ids, data.y, data.shares, std::nullopt, data.y_placebo, data.x_realized};
    if (data.clusters) raw.clusters = std::vector<long long>(data.clusters->begin(), data.clusters->end());
    return validate_dataset(std::move(raw));
}

/// Checks that CRVE can be computed: labels present and G >= 2.
inline void require_clusters(const Dataset& data) {
    if (!data.clusters) throw ValidationError("cluster-robust estimator requested but no cluster labels");
    if (data.cluster_count() < 2) {
        throw ValidationError("cluster-robust estimator needs at least 2 clusters, got " +
                              std::to_string(data.cluster_count()));
    }
}

enum class ShockLaw {
    iid_standard_normal,
    balanced_binary,
};

inline std::string_view to_string(ShockLaw law) {
    return law == ShockLaw::iid_standard_normal ? "iid-standard-normal" : "balanced-binary";
}

inline ShockLaw parse_shock_law(std::string_view name) {
    if (name == "iid-standard-normal" || name == "normal") return ShockLaw::iid_standard_normal;
    if (name == "balanced-binary" || name == "binary") return ShockLaw::balanced_binary;
    throw ValidationError("unknown shock law '" + std::string(name) + "'");
}

/// Which outcome vector a design-based simulation holds fixed: the realized
/// y, or the residualized y - beta_hat * x.
enum class OutcomeMode { y_fixed, eps_fixed };

/// One draw of sector-level shocks.
struct ShockDraw {
    std::vector<double> values;
    ShockLaw law = ShockLaw::iid_standard_normal;
};

/// Fills `treated` (length F) with a uniformly random subset of exactly F/2
/// ones via a partial Fisher-Yates shuffle.
inline void draw_balanced_assignment(RandomStream& rng, std::span<double> treated,
                                     std::vector<std::uint32_t>& scratch) {
    const std::size_t f = treated.size();
    if (f % 2 != 0) throw ValidationError("balanced-binary shocks need an even sector count, got " + std::to_string(f));
    scratch.resize(f);
    for (std::size_t i = 0; i < f; ++i) scratch[i] = static_cast<std::uint32_t>(i);
    std::fill(treated.begin(), treated.end(), 0.0);
    for (std::size_t i = 0; i < f / 2; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(f - i));
        std::swap(scratch[i], scratch[j]);
        treated[scratch[i]] = 1.0;
    }
}

inline void draw_shocks_into(RandomStream& rng, ShockLaw law, std::span<double> out,
                             std::vector<std::uint32_t>& scratch) {
    if (law == ShockLaw::iid_standard_normal) {
        rng.fill_normal(out);
    } else {
        draw_balanced_assignment(rng, out, scratch);
    }
}

inline ShockDraw draw_shocks(RandomStream& rng, ShockLaw law, std::size_t sectors) {
    ShockDraw draw{std::vector<double>(sectors), law};
    std::vector<std::uint32_t> scratch;
    draw_shocks_into(rng, law, draw.values, scratch);
    return draw;
}

/// x_i = sum_f w_if * X_f.
inline void build_shift_share_into(const DenseMatrix& shares, std::span<const double> shocks, std::span<double> out) {
    detail::require_length(shocks.size(), shares.cols(), "shocks");
    detail::require_length(out.size(), shares.rows(), "regressor");
    for (std::size_t i = 0; i < shares.rows(); ++i) {
        const auto w = shares.row(i);
        double acc = 0.0;
        for (std::size_t f = 0; f < w.size(); ++f) acc += w[f] * shocks[f];
        out[i] = acc;
    }
}

inline std::vector<double> build_shift_share(const DenseMatrix& shares, std::span<const double> shocks) {
    std::vector<double> x(shares.rows());
    build_shift_share_into(shares, shocks, x);
    return x;
}

inline std::vector<double> build_shift_share(const DenseMatrix& shares, const ShockDraw& shocks) {
    return build_shift_share(shares, std::span<const double>(shocks.values));
}

/// F equally sized groups of m units with a balanced binary treatment:
/// a group-randomized experiment viewed as a shift-share design.
class PartitionDesign {
public:
    PartitionDesign(std::size_t groups, std::size_t group_size, std::vector<bool> treated)
        : groups_(groups), group_size_(group_size), treated_(std::move(treated)) {
        if (groups_ < 2) throw ValidationError("partition design needs at least 2 groups");
        if (groups_ % 2 != 0) throw ValidationError("partition design needs an even group count, got " + std::to_string(groups_));
        if (group_size_ < 1) throw ValidationError("partition design needs group size >= 1");
        detail::require_length(treated_.size(), groups_, "treated");
        const auto count = static_cast<std::size_t>(std::count(treated_.begin(), treated_.end(), true));
        if (count != groups_ / 2) {
            throw ValidationError("partition design must treat exactly F/2 groups, got " + std::to_string(count));
        }
    }

    // Units are laid out group by group: unit i belongs to group i / m.

    /// Treats the first F/2 groups.
    static PartitionDesign first_half_treated(std::size_t groups, std::size_t group_size) {
        std::vector<bool> treated(groups, false);
        for (std::size_t g = 0; g < groups / 2; ++g) treated[g] = true;
        return PartitionDesign(groups, group_size, std::move(treated));
    }

    static PartitionDesign random(std::size_t groups, std::size_t group_size, RandomStream& rng) {
        std::vector<double> draw(groups);
        std::vector<std::uint32_t> scratch;
        draw_balanced_assignment(rng, draw, scratch);
        std::vector<bool> treated(groups);
        for (std::size_t g = 0; g < groups; ++g) treated[g] = draw[g] > 0.5;
        return PartitionDesign(groups, group_size, std::move(treated));
    }

    std::size_t groups() const noexcept { return groups_; }
    std::size_t group_size() const noexcept { return group_size_; }
    std::size_t units() const noexcept { return groups_ * group_size_; }
    std::size_t group_of(std::size_t unit) const noexcept { return unit / group_size_; }
    const std::vector<bool>& treated() const noexcept { return treated_; }

    std::vector<int> group_labels() const {
        std::vector<int> labels(units());
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(group_of(i));
        return labels;
    }

    /// Group-level shocks X_f in {0, 1}.
    std::vector<double> group_treatment() const {
        std::vector<double> t(groups_);
        for (std::size_t g = 0; g < groups_; ++g) t[g] = treated_[g] ? 1.0 : 0.0;
        return t;
    }

    /// Unit-level treatment indicator x_i in {0, 1}.
    std::vector<double> unit_treatment() const {
        std::vector<double> x(units());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = treated_[group_of(i)] ? 1.0 : 0.0;
        return x;
    }

    friend bool operator==(const PartitionDesign&, const PartitionDesign&) = default;

private:
    std::size_t groups_;
    std::size_t group_size_;
    std::vector<bool> treated_;
};

/// w_if = 1 if unit i is in group f, else 0.
inline DenseMatrix partition_to_shares(const PartitionDesign& design) {
    DenseMatrix shares(design.units(), design.groups());
    for (std::size_t i = 0; i < design.units(); ++i) shares(i, design.group_of(i)) = 1.0;
    return shares;
}

}  // namespace ssdiag

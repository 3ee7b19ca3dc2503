#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssdiag/error.hpp"

namespace ssdiag {

/// Dense row-major matrix. Share matrices in practice have a few hundred
/// columns at most, so no sparse storage.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_) {
            throw ValidationError("matrix storage does not match " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
        }
    }

    static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        const std::size_t ncols = rows.empty() ? 0 : rows.front().size();
        DenseMatrix m(rows.size(), ncols);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != ncols) {
                throw ValidationError("ragged matrix rows: row " + std::to_string(r) + " has " +
                                      std::to_string(rows[r].size()) + " entries, expected " +
                                      std::to_string(ncols));
            }
            for (std::size_t c = 0; c < ncols; ++c) m(r, c) = rows[r][c];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols_, cols_};
    }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

}  // namespace ssdiag

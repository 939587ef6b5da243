#pragma once

#include "obsctl/error.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace obsctl {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

struct Triplet {
    Index row;
    Index col;
    double value;
};

/// Compressed sparse row matrix in canonical form: column indices are
/// strictly increasing within each row. Explicit zeros produced by
/// assembly are kept so that the pattern does not depend on the values.
class SparseMatrix {
public:
    SparseMatrix() : row_offsets_(1, 0) {}

    SparseMatrix(Index nrows, Index ncols, std::vector<Index> row_offsets,
                 std::vector<Index> col_indices, std::vector<double> values)
        : nrows_(nrows), ncols_(ncols), row_offsets_(std::move(row_offsets)),
          col_indices_(std::move(col_indices)), values_(std::move(values)) {
        validate();
    }

    /// Duplicate entries are summed.
    static SparseMatrix from_triplets(Index nrows, Index ncols, std::vector<Triplet> entries) {
        for (const auto& t : entries) {
            if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols) {
                throw DimensionMismatch("triplet (" + std::to_string(t.row) + ", " +
                                        std::to_string(t.col) + ") outside " +
                                        std::to_string(nrows) + "x" + std::to_string(ncols));
            }
        }
        std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        std::vector<Index> offsets(static_cast<std::size_t>(nrows) + 1, 0);
        std::vector<Index> cols;
        std::vector<double> vals;
        cols.reserve(entries.size());
        vals.reserve(entries.size());
        Index last_row = -1;
        Index last_col = -1;
        for (const auto& t : entries) {
            if (t.row == last_row && t.col == last_col) {
                vals.back() += t.value;
                continue;
            }
            cols.push_back(t.col);
            vals.push_back(t.value);
            ++offsets[static_cast<std::size_t>(t.row) + 1];
            last_row = t.row;
            last_col = t.col;
        }
        for (std::size_t i = 1; i < offsets.size(); ++i) {
            offsets[i] += offsets[i - 1];
        }
        return SparseMatrix(nrows, ncols, std::move(offsets), std::move(cols), std::move(vals));
    }

    static SparseMatrix identity(Index n) {
        Vector ones = Vector::Ones(n);
        return diagonal_matrix(ones);
    }

    static SparseMatrix diagonal_matrix(const Vector& d) {
        const Index n = d.size();
        std::vector<Index> offsets(static_cast<std::size_t>(n) + 1);
        std::vector<Index> cols(static_cast<std::size_t>(n));
        std::vector<double> vals(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            offsets[static_cast<std::size_t>(i)] = i;
            cols[static_cast<std::size_t>(i)] = i;
            vals[static_cast<std::size_t>(i)] = d[i];
        }
        offsets[static_cast<std::size_t>(n)] = n;
        return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
    }

    Index rows() const noexcept { return nrows_; }
    Index cols() const noexcept { return ncols_; }
    Index nonzeros() const noexcept { return static_cast<Index>(values_.size()); }
    bool square() const noexcept { return nrows_ == ncols_; }

    std::span<const Index> row_offsets() const noexcept { return row_offsets_; }
    std::span<const Index> col_indices() const noexcept { return col_indices_; }
    std::span<const double> values() const noexcept { return values_; }

    /// Value at (i, j), zero when the entry is not stored.
    double coeff(Index i, Index j) const {
        const auto first = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(i)];
        const auto last = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(i) + 1];
        const auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) {
            return 0.0;
        }
        return values_[static_cast<std::size_t>(it - col_indices_.begin())];
    }

    Vector diagonal() const {
        Vector d = Vector::Zero(std::min(nrows_, ncols_));
        for (Index i = 0; i < d.size(); ++i) {
            d[i] = coeff(i, i);
        }
        return d;
    }

    Vector operator*(const Vector& x) const {
        if (x.size() != ncols_) {
            throw DimensionMismatch("matvec: matrix has " + std::to_string(ncols_) +
                                    " columns, vector has " + std::to_string(x.size()));
        }
        Vector y(nrows_);
        for (Index i = 0; i < nrows_; ++i) {
            double s = 0.0;
            for (Index k = row_offsets_[static_cast<std::size_t>(i)];
                 k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
                s += values_[static_cast<std::size_t>(k)] * x[col_indices_[static_cast<std::size_t>(k)]];
            }
            y[i] = s;
        }
        return y;
    }

    SparseMatrix operator*(double s) const {
        SparseMatrix r = *this;
        for (auto& v : r.values_) {
            v *= s;
        }
        return r;
    }

    /// A + diag(d); every diagonal entry must already be stored.
    SparseMatrix plus_diagonal(const Vector& d) const {
        if (!square() || d.size() != nrows_) {
            throw DimensionMismatch("plus_diagonal: size mismatch");
        }
        SparseMatrix r = *this;
        for (Index i = 0; i < nrows_; ++i) {
            const auto first = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(i)];
            const auto last = col_indices_.begin() + row_offsets_[static_cast<std::size_t>(i) + 1];
            const auto it = std::lower_bound(first, last, i);
            if (it == last || *it != i) {
                throw DimensionMismatch("plus_diagonal: diagonal entry not stored in row " + std::to_string(i));
            }
            r.values_[static_cast<std::size_t>(it - col_indices_.begin())] += d[i];
        }
        return r;
    }

    /// Rows [row_begin, row_end) and columns [col_begin, col_end).
    SparseMatrix block(Index row_begin, Index row_end, Index col_begin, Index col_end) const {
        if (row_begin < 0 || row_end > nrows_ || col_begin < 0 || col_end > ncols_ ||
            row_begin > row_end || col_begin > col_end) {
            throw DimensionMismatch("block range outside matrix");
        }
        std::vector<Index> offsets(static_cast<std::size_t>(row_end - row_begin) + 1, 0);
        std::vector<Index> cols;
        std::vector<double> vals;
        for (Index i = row_begin; i < row_end; ++i) {
            for (Index k = row_offsets_[static_cast<std::size_t>(i)];
                 k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
                const Index j = col_indices_[static_cast<std::size_t>(k)];
                if (j >= col_begin && j < col_end) {
                    cols.push_back(j - col_begin);
                    vals.push_back(values_[static_cast<std::size_t>(k)]);
                }
            }
            offsets[static_cast<std::size_t>(i - row_begin) + 1] = static_cast<Index>(cols.size());
        }
        return SparseMatrix(row_end - row_begin, col_end - col_begin, std::move(offsets),
                            std::move(cols), std::move(vals));
    }

    /// Principal submatrix on the given (sorted, unique) index set.
    SparseMatrix principal_submatrix(std::span<const Index> keep) const {
        std::vector<Index> position(static_cast<std::size_t>(ncols_), -1);
        for (std::size_t k = 0; k < keep.size(); ++k) {
            position[static_cast<std::size_t>(keep[k])] = static_cast<Index>(k);
        }
        std::vector<Index> offsets(keep.size() + 1, 0);
        std::vector<Index> cols;
        std::vector<double> vals;
        for (std::size_t r = 0; r < keep.size(); ++r) {
            const Index i = keep[r];
            for (Index k = row_offsets_[static_cast<std::size_t>(i)];
                 k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
                const Index p = position[static_cast<std::size_t>(col_indices_[static_cast<std::size_t>(k)])];
                if (p >= 0) {
                    cols.push_back(p);
                    vals.push_back(values_[static_cast<std::size_t>(k)]);
                }
            }
            offsets[r + 1] = static_cast<Index>(cols.size());
        }
        const auto n = static_cast<Index>(keep.size());
        return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
    }

    double norm_inf() const {
        double best = 0.0;
        for (Index i = 0; i < nrows_; ++i) {
            double s = 0.0;
            for (Index k = row_offsets_[static_cast<std::size_t>(i)];
                 k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
                s += std::abs(values_[static_cast<std::size_t>(k)]);
            }
            best = std::max(best, s);
        }
        return best;
    }

    bool is_symmetric(double tol = 0.0) const {
        if (!square()) {
            return false;
        }
        for (Index i = 0; i < nrows_; ++i) {
            for (Index k = row_offsets_[static_cast<std::size_t>(i)];
                 k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
                const Index j = col_indices_[static_cast<std::size_t>(k)];
                if (std::abs(values_[static_cast<std::size_t>(k)] - coeff(j, i)) > tol) {
                    return false;
                }
            }
        }
        return true;
    }

    std::vector<Triplet> triplets() const {
        std::vector<Triplet> out;
        out.reserve(values_.size());
        for (Index i = 0; i < nrows_; ++i) {
            for (Index k = row_offsets_[static_cast<std::size_t>(i)];
                 k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
                out.push_back({i, col_indices_[static_cast<std::size_t>(k)], values_[static_cast<std::size_t>(k)]});
            }
        }
        return out;
    }

    Eigen::SparseMatrix<double> to_eigen() const {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(values_.size());
        for (const auto& e : triplets()) {
            t.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
        }
        Eigen::SparseMatrix<double> m(nrows_, ncols_);
        m.setFromTriplets(t.begin(), t.end());
        m.makeCompressed();
        return m;
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(nrows_, ncols_);
        for (const auto& e : triplets()) {
            d(e.row, e.col) = e.value;
        }
        return d;
    }

private:
    void validate() const {
        if (nrows_ < 0 || ncols_ < 0) {
            throw DimensionMismatch("negative matrix dimension");
        }
        if (row_offsets_.size() != static_cast<std::size_t>(nrows_) + 1 || row_offsets_.front() != 0 ||
            row_offsets_.back() != static_cast<Index>(col_indices_.size()) ||
            col_indices_.size() != values_.size()) {
            throw DimensionMismatch("inconsistent CSR arrays");
        }
        for (Index i = 0; i < nrows_; ++i) {
            const Index b = row_offsets_[static_cast<std::size_t>(i)];
            const Index e = row_offsets_[static_cast<std::size_t>(i) + 1];
            if (e < b) {
                throw DimensionMismatch("row offsets decrease at row " + std::to_string(i));
            }
            for (Index k = b; k < e; ++k) {
                const Index j = col_indices_[static_cast<std::size_t>(k)];
                if (j < 0 || j >= ncols_) {
                    throw DimensionMismatch("column index out of range in row " + std::to_string(i));
                }
                if (k > b && col_indices_[static_cast<std::size_t>(k) - 1] >= j) {
                    throw DimensionMismatch("row " + std::to_string(i) + " not in canonical order");
                }
            }
        }
    }

    Index nrows_ = 0;
    Index ncols_ = 0;
    std::vector<Index> row_offsets_;
    std::vector<Index> col_indices_;
    std::vector<double> values_;
};

} // namespace obsctl

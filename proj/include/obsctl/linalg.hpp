#pragma once

#include "obsctl/error.hpp"
#include "obsctl/sparse_matrix.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <Eigen/OrderingMethods>

#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace obsctl {

/// Pivots below this fraction of the largest diagonal entry count as breakdown.
inline constexpr double kPivotTolerance = 1e-14;
/// Largest accepted normwise backward error of a direct solve.
inline constexpr double kBackwardErrorTolerance = 1e-6;

/// Normwise backward error ||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf).
inline double backward_error(const SparseMatrix& A, const Vector& x, const Vector& b) {
    const double r = (A * x - b).lpNorm<Eigen::Infinity>();
    const double scale = A.norm_inf() * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
    return scale > 0.0 ? r / scale : r;
}

/// Immutable direct factorization. Symmetric input goes through a sparse
/// LDL^T with AMD ordering, anything else through sparse LU with COLAMD.
class Factorization {
public:
    enum class Kind { Cholesky, LU };

    Kind kind() const noexcept { return kind_; }
    /// True when every LDL^T pivot was positive, i.e. the matrix is SPD.
    bool spd_ok() const noexcept { return spd_ok_; }
    Index size() const noexcept { return matrix_->rows(); }
    const SparseMatrix& matrix() const noexcept { return *matrix_; }

    Vector solve(const Vector& b) const {
        if (b.size() != size()) {
            throw DimensionMismatch("solve: factor of size " + std::to_string(size()) +
                                    ", right-hand side of size " + std::to_string(b.size()));
        }
        Vector x = kind_ == Kind::Cholesky ? Vector(ldlt_->solve(b)) : Vector(lu_->solve(b));
        if (!x.allFinite()) {
            throw SingularMatrix("solve produced non-finite values");
        }
        const double err = backward_error(*matrix_, x, b);
        if (err > kBackwardErrorTolerance) {
            throw SingularMatrix("solve backward error " + std::to_string(err) + " exceeds tolerance");
        }
        return x;
    }

    static Factorization cholesky(const SparseMatrix& A) {
        require_square(A);
        Factorization f(A, Kind::Cholesky);
        f.ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
        f.ldlt_->compute(A.to_eigen());
        if (f.ldlt_->info() != Eigen::Success) {
            throw SingularMatrix("LDL^T factorization broke down");
        }
        // Pivots are compared with their own diagonal entry: penalized
        // systems mix entries of order 1 and 1e40 on the same diagonal.
        const Vector d = f.ldlt_->vectorD();
        const Vector a = f.ldlt_->permutationP() * A.diagonal();
        f.spd_ok_ = true;
        for (Index i = 0; i < d.size(); ++i) {
            if (!(std::abs(d[i]) > kPivotTolerance * std::abs(a[i]))) {
                throw SingularMatrix("pivot " + std::to_string(d[i]) + " at position " + std::to_string(i) +
                                     " below tolerance");
            }
            if (d[i] < 0.0) {
                f.spd_ok_ = false;
            }
        }
        return f;
    }

    static Factorization lu(const SparseMatrix& A) {
        require_square(A);
        Factorization f(A, Kind::LU);
        f.lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
        const auto E = A.to_eigen();
        f.lu_->analyzePattern(E);
        f.lu_->factorize(E);
        if (f.lu_->info() != Eigen::Success) {
            throw SingularMatrix("sparse LU failed: " + f.lu_->lastErrorMessage());
        }
        return f;
    }

private:
    Factorization(const SparseMatrix& A, Kind kind)
        : kind_(kind), matrix_(std::make_shared<const SparseMatrix>(A)) {}

    static void require_square(const SparseMatrix& A) {
        if (!A.square()) {
            throw DimensionMismatch("factorize: matrix is " + std::to_string(A.rows()) + "x" +
                                    std::to_string(A.cols()));
        }
    }

    Kind kind_;
    bool spd_ok_ = false;
    std::shared_ptr<const SparseMatrix> matrix_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
};

/// LDL^T for symmetric matrices, LU otherwise. Throws SingularMatrix on
/// pivot breakdown.
inline Factorization factorize(const SparseMatrix& A) {
    if (A.is_symmetric()) {
        return Factorization::cholesky(A);
    }
    return Factorization::lu(A);
}

inline Vector solve(const Factorization& F, const Vector& b) { return F.solve(b); }

struct CgResult {
    Vector x;
    Index iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients for SPD systems.
inline CgResult conjugate_gradient(const SparseMatrix& A, const Vector& b, double tol = 1e-12,
                                   Index max_iters = 0) {
    if (!A.square() || A.rows() != b.size()) {
        throw DimensionMismatch("conjugate_gradient: size mismatch");
    }
    if (max_iters <= 0) {
        max_iters = 10 * A.rows() + 10;
    }
    const Vector inv_diag = A.diagonal().cwiseInverse();
    CgResult res;
    res.x = Vector::Zero(b.size());
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.converged = true;
        return res;
    }
    Vector r = b;
    Vector z = inv_diag.cwiseProduct(r);
    Vector p = z;
    double rz = r.dot(z);
    for (Index k = 1; k <= max_iters; ++k) {
        const Vector Ap = A * p;
        const double step = rz / p.dot(Ap);
        res.x += step * p;
        r -= step * Ap;
        res.iterations = k;
        res.relative_residual = r.norm() / bnorm;
        if (res.relative_residual <= tol) {
            res.converged = true;
            return res;
        }
        z = inv_diag.cwiseProduct(r);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    return res;
}

struct EigenPair {
    double value = 0.0;
    Vector vector;   ///< M-normalized
    Index iterations = 0;
};

/// Smallest eigenvalue of A v = lambda M v by inverse power iteration with
/// M-normalization. Stops when successive Rayleigh quotients differ by less
/// than tol * lambda. A and M must be SPD.
inline EigenPair smallest_generalized_eigenvalue(const SparseMatrix& A, const SparseMatrix& M,
                                                 double tol = 1e-12, Index max_iters = 10000) {
    if (!A.square() || !M.square() || A.rows() != M.rows()) {
        throw DimensionMismatch("eigenproblem: A and M must be square and of equal size");
    }
    const auto F = factorize(A);
    if (!F.spd_ok()) {
        throw SingularMatrix("eigenproblem: A is not positive definite");
    }
    auto m_norm = [&M](const Vector& v) { return std::sqrt(v.dot(M * v)); };

    EigenPair out;
    Vector v = Vector::Ones(A.rows());
    v /= m_norm(v);
    double rho = v.dot(A * v);
    for (Index k = 1; k <= max_iters; ++k) {
        Vector w = F.solve(M * v);
        const double wmw = w.dot(M * w);
        const double next = w.dot(A * w) / wmw;
        v = w / std::sqrt(wmw);
        out.iterations = k;
        if (std::abs(next - rho) < tol * std::abs(next)) {
            out.value = next;
            out.vector = v / m_norm(v);
            return out;
        }
        rho = next;
    }
    throw NoConvergence("inverse iteration did not converge", static_cast<std::size_t>(max_iters));
}

} // namespace obsctl

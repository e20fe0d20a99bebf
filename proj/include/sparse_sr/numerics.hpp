#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sparse_sr/errors.hpp"

namespace sparse_sr {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatD = Mat<double>;
using VecD = Vec<double>;
using Index = Eigen::Index;

/// SplitMix64 generator. The stream is a pure function of the seed, so runs
/// reproduce across platforms and compilers.
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// uniform() takes the top 53 bits; normal() is Box-Muller without caching.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next()
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal()
    {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t index(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

template <typename Scalar>
Vec<Scalar> matvec(const Mat<Scalar>& m, const Vec<Scalar>& v)
{
    if (m.cols() != v.size()) {
        throw DimensionError("matvec: matrix has " + std::to_string(m.cols()) +
                             " columns but vector has length " + std::to_string(v.size()));
    }
    return m * v;
}

/// Lower Cholesky factor of a symmetric positive-definite Gram matrix that can
/// grow by one row/column at a time. Any pivot below 1e-12 times the largest
/// diagonal entry seen so far is treated as rank deficiency.
template <typename Scalar>
class GramCholesky {
public:
    static constexpr Scalar kPivotGuard = Scalar(1e-12);

    GramCholesky() = default;

    explicit GramCholesky(const Mat<Scalar>& gram)
    {
        if (gram.rows() != gram.cols()) {
            throw DimensionError("GramCholesky: matrix is not square");
        }
        lower_.resize(gram.rows(), gram.rows());
        lower_.setZero();
        for (Index j = 0; j < gram.rows(); ++j) {
            append(gram.col(j).head(j), gram(j, j));
        }
    }

    Index size() const { return size_; }

    /// Extends the factor with a new column: `cross` holds inner products with
    /// the existing columns, `diag` the new column's squared norm.
    template <typename Derived>
    void append(const Eigen::MatrixBase<Derived>& cross, Scalar diag)
    {
        if (cross.size() != size_) {
            throw DimensionError("GramCholesky::append: cross-term length mismatch");
        }
        max_diag_ = std::max(max_diag_, diag);
        if (lower_.rows() <= size_) {
            const Index cap = std::max<Index>(4, 2 * (size_ + 1));
            Mat<Scalar> grown = Mat<Scalar>::Zero(cap, cap);
            grown.topLeftCorner(size_, size_) = lower_.topLeftCorner(size_, size_);
            lower_.swap(grown);
        }
        Vec<Scalar> w = cross;
        if (size_ > 0) {
            lower_.topLeftCorner(size_, size_).template triangularView<Eigen::Lower>().solveInPlace(w);
        }
        const Scalar pivot = diag - w.squaredNorm();
        if (!(pivot > kPivotGuard * max_diag_)) {
            throw SingularSystemError("rank-deficient Gram matrix (pivot " + std::to_string(double(pivot)) +
                                      " at column " + std::to_string(size_) + ")");
        }
        lower_.row(size_).head(size_) = w.transpose();
        lower_(size_, size_) = std::sqrt(pivot);
        ++size_;
    }

    /// Solves G z = rhs.
    template <typename Derived>
    Vec<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const
    {
        if (rhs.size() != size_) {
            throw DimensionError("GramCholesky::solve: right-hand side length mismatch");
        }
        Vec<Scalar> z = rhs;
        const auto l = lower_.topLeftCorner(size_, size_);
        l.template triangularView<Eigen::Lower>().solveInPlace(z);
        l.transpose().template triangularView<Eigen::Upper>().solveInPlace(z);
        return z;
    }

    /// Solves G Z = rhs column by column.
    Mat<Scalar> solve_matrix(const Mat<Scalar>& rhs) const
    {
        if (rhs.rows() != size_) {
            throw DimensionError("GramCholesky::solve_matrix: row mismatch");
        }
        Mat<Scalar> z = rhs;
        const auto l = lower_.topLeftCorner(size_, size_);
        l.template triangularView<Eigen::Lower>().solveInPlace(z);
        l.transpose().template triangularView<Eigen::Upper>().solveInPlace(z);
        return z;
    }

private:
    Mat<Scalar> lower_;
    Index size_ = 0;
    Scalar max_diag_ = Scalar(0);
};

/// argmin_z ||A z - b|| through the normal equations.
template <typename Scalar>
Vec<Scalar> least_squares(const Mat<Scalar>& a, const Vec<Scalar>& b)
{
    if (a.rows() != b.size()) {
        throw DimensionError("least_squares: A has " + std::to_string(a.rows()) + " rows but b has length " +
                             std::to_string(b.size()));
    }
    if (a.rows() < a.cols()) {
        throw DimensionError("least_squares: system is underdetermined");
    }
    const Mat<Scalar> gram = a.transpose() * a;
    const GramCholesky<Scalar> chol(gram);
    return chol.solve(a.transpose() * b);
}

/// Power-iteration estimate of the largest eigenvalue of MᵀM. The result is a
/// Rayleigh quotient, so it never overestimates.
template <typename Scalar>
Scalar spectral_norm_sq(const Mat<Scalar>& m, std::size_t iters, Rng& rng)
{
    if (iters < 1) {
        throw InvalidArgument("spectral_norm_sq: iters must be at least 1");
    }
    Vec<Scalar> v(m.cols());
    for (Index i = 0; i < v.size(); ++i) {
        v(i) = static_cast<Scalar>(rng.normal());
    }
    Scalar n = v.norm();
    if (n == Scalar(0)) {
        v.setOnes();
        n = v.norm();
    }
    v /= n;
    for (std::size_t it = 0; it < iters; ++it) {
        const Vec<Scalar> w = m.transpose() * (m * v);
        const Scalar wn = w.norm();
        if (wn == Scalar(0)) {
            return Scalar(0);
        }
        v = w / wn;
    }
    return (m * v).squaredNorm();
}

template <typename Scalar>
Mat<Scalar> normalize_columns(const Mat<Scalar>& m)
{
    Mat<Scalar> out = m;
    for (Index j = 0; j < m.cols(); ++j) {
        const Scalar n = m.col(j).norm();
        if (n == Scalar(0)) {
            throw InvalidArgument("normalize_columns: column " + std::to_string(j) + " is zero");
        }
        out.col(j) /= n;
    }
    return out;
}

}  // namespace sparse_sr

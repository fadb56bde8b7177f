#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pbls/errors.hpp"

namespace pbls {

// Tally of scalar multiply-add work. The client/worker complexity claims are
// checked against these counters rather than wall time.
struct OpCounter {
    std::uint64_t mul_adds = 0;

    void add(std::uint64_t n) { mul_adds += n; }
    void reset() { mul_adds = 0; }
};

/// Row-major dense matrix of IEEE binary64 values.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix zeros(std::size_t rows, std::size_t cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    DenseMatrix transpose() const;

    /// True if every entry is finite.
    bool all_finite() const;

    bool operator==(const DenseMatrix& other) const = default;

    /// max_ij |a_ij - b_ij|; shapes must match.
    static double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
    double max_abs() const;
    double frobenius_norm() const;

    // Wire/file layout: rows u64 LE, cols u64 LE, then rows*cols binary64 LE
    // in row-major order.
    std::vector<std::uint8_t> serialize() const;
    static DenseMatrix deserialize(std::span<const std::uint8_t> bytes);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Permutation matrix with +-1 entries: P(i,j) = sign[i] iff perm[i] == j.
/// Orthogonal by construction, so its inverse is its transpose.
struct SignedPermutation {
    std::vector<std::size_t> perm;  // row i has its nonzero in column perm[i]
    std::vector<int> signs;         // each exactly -1 or +1

    std::size_t size() const { return perm.size(); }
    void validate() const;  // throws InvalidArgument on a broken invariant
    DenseMatrix to_dense() const;
};

/// Permutation matrix with nonzero integer entries: Q(i,j) = scale[i] iff
/// perm[i] == j. Inverted by transposing and taking reciprocal scales.
struct ScaledPermutation {
    std::vector<std::size_t> perm;
    std::vector<std::int64_t> scales;  // nonzero, |scale| <= size

    std::size_t size() const { return perm.size(); }
    void validate() const;
    DenseMatrix to_dense() const;
};

/// Classical product with deterministic, order-independent accumulation:
/// each dot product is summed in value-sorted order, so the result depends
/// only on the multiset of per-term products. This is what makes the
/// pow2-masked Gram round-trip bit-exact.
DenseMatrix mat_mul(const DenseMatrix& a, const DenseMatrix& b, OpCounter* ops = nullptr);

/// P*A as a row permutation with sign flips, O(rows*cols).
DenseMatrix apply_signed_left(const SignedPermutation& p, const DenseMatrix& a,
                              OpCounter* ops = nullptr);

/// A*Q as a column permutation with integer scaling, O(rows*cols).
DenseMatrix apply_scaled_right(const DenseMatrix& a, const ScaledPermutation& q,
                               OpCounter* ops = nullptr);

/// Q^T * M * Q using the permutation/scale structure, O(n^2).
DenseMatrix conjugate_scaled(const ScaledPermutation& q, const DenseMatrix& m,
                             OpCounter* ops = nullptr);

/// (Q^T)^-1 * M * Q^-1, the inverse of conjugate_scaled, O(n^2).
DenseMatrix unconjugate_scaled(const ScaledPermutation& q, const DenseMatrix& m,
                               OpCounter* ops = nullptr);

/// Inverse by LU with partial pivoting. Throws SingularMatrixError when a
/// pivot falls below 1e-300 in absolute value.
DenseMatrix dense_inverse(const DenseMatrix& m, OpCounter* ops = nullptr);

std::vector<double> mat_vec(const DenseMatrix& a, std::span<const double> v,
                            OpCounter* ops = nullptr);

}  // namespace pbls

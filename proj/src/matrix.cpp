#include "pbls/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace pbls {

namespace {

void check(bool cond, const char* msg) {
    if (!cond) throw DimensionError(msg);
}

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw DimensionError("DenseMatrix: data length does not match rows*cols");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::zeros(std::size_t rows, std::size_t cols) {
    return DenseMatrix(rows, cols);
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double DenseMatrix::max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    check(a.rows_ == b.rows_ && a.cols_ == b.cols_, "max_abs_diff: shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.data_.size(); ++i)
        d = std::max(d, std::fabs(a.data_[i] - b.data_[i]));
    return d;
}

double DenseMatrix::max_abs() const {
    double d = 0.0;
    for (double x : data_) d = std::max(d, std::fabs(x));
    return d;
}

double DenseMatrix::frobenius_norm() const {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return std::sqrt(s);
}

std::vector<std::uint8_t> DenseMatrix::serialize() const {
    std::vector<std::uint8_t> out;
    out.reserve(16 + data_.size() * 8);
    put_u64_le(out, rows_);
    put_u64_le(out, cols_);
    for (double x : data_) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        put_u64_le(out, bits);
    }
    return out;
}

DenseMatrix DenseMatrix::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16) throw FormatError("matrix: header truncated");
    std::uint64_t rows = get_u64_le(bytes.data());
    std::uint64_t cols = get_u64_le(bytes.data() + 8);
    if (rows == 0 || cols == 0) throw FormatError("matrix: zero dimension");
    if (rows > (1u << 24) || cols > (1u << 24)) throw FormatError("matrix: implausible dimension");
    std::uint64_t need = 16 + rows * cols * 8;
    if (bytes.size() != need) throw FormatError("matrix: body length mismatch");
    std::vector<double> data(rows * cols);
    for (std::uint64_t i = 0; i < rows * cols; ++i) {
        std::uint64_t bits = get_u64_le(bytes.data() + 16 + i * 8);
        std::memcpy(&data[i], &bits, 8);
    }
    return DenseMatrix(rows, cols, std::move(data));
}

void SignedPermutation::validate() const {
    const std::size_t n = perm.size();
    if (n == 0) throw InvalidArgument("SignedPermutation: empty");
    if (signs.size() != n) throw InvalidArgument("SignedPermutation: signs length mismatch");
    std::vector<bool> seen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (perm[i] >= n || seen[perm[i]])
            throw InvalidArgument("SignedPermutation: perm is not a bijection");
        seen[perm[i]] = true;
        if (signs[i] != 1 && signs[i] != -1)
            throw InvalidArgument("SignedPermutation: sign not in {-1,+1}");
    }
}

DenseMatrix SignedPermutation::to_dense() const {
    DenseMatrix m(size(), size());
    for (std::size_t i = 0; i < size(); ++i) m(i, perm[i]) = static_cast<double>(signs[i]);
    return m;
}

void ScaledPermutation::validate() const {
    const std::size_t n = perm.size();
    if (n == 0) throw InvalidArgument("ScaledPermutation: empty");
    if (scales.size() != n) throw InvalidArgument("ScaledPermutation: scales length mismatch");
    std::vector<bool> seen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (perm[i] >= n || seen[perm[i]])
            throw InvalidArgument("ScaledPermutation: perm is not a bijection");
        seen[perm[i]] = true;
        if (scales[i] == 0)
            throw InvalidArgument("ScaledPermutation: zero scale");
        std::int64_t mag = scales[i] < 0 ? -scales[i] : scales[i];
        // pow2 mode can round the top scale up to the next power of two
        if (mag > static_cast<std::int64_t>(2 * n))
            throw InvalidArgument("ScaledPermutation: scale magnitude out of range");
    }
}

DenseMatrix ScaledPermutation::to_dense() const {
    DenseMatrix m(size(), size());
    for (std::size_t i = 0; i < size(); ++i) m(i, perm[i]) = static_cast<double>(scales[i]);
    return m;
}

DenseMatrix mat_mul(const DenseMatrix& a, const DenseMatrix& b, OpCounter* ops) {
    check(a.cols() == b.rows(), "mat_mul: inner dimensions do not match");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    DenseMatrix c(m, n);
    std::vector<double> terms(k);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t r = 0; r < k; ++r) terms[r] = a(i, r) * b(r, j);
            // Value-sorted summation: the sum depends only on the multiset of
            // products, so row-permuted inputs reproduce it bit-for-bit.
            std::sort(terms.begin(), terms.end());
            double s = 0.0;
            for (double t : terms) s += t;
            c(i, j) = s;
        }
    }
    if (ops) ops->add(static_cast<std::uint64_t>(m) * n * k);
    return c;
}

DenseMatrix apply_signed_left(const SignedPermutation& p, const DenseMatrix& a, OpCounter* ops) {
    check(p.size() == a.rows(), "apply_signed_left: P size does not match A rows");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double s = static_cast<double>(p.signs[i]);
        const std::size_t src = p.perm[i];  // out row i = s * A row perm[i]
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = s * a(src, j);
    }
    if (ops) ops->add(a.rows() * a.cols());
    return out;
}

DenseMatrix apply_scaled_right(const DenseMatrix& a, const ScaledPermutation& q, OpCounter* ops) {
    check(a.cols() == q.size(), "apply_scaled_right: A cols do not match Q size");
    DenseMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double s = static_cast<double>(q.scales[i]);
        const std::size_t dst = q.perm[i];  // out column perm[i] = s * A column i
        for (std::size_t r = 0; r < a.rows(); ++r) out(r, dst) = s * a(r, i);
    }
    if (ops) ops->add(a.rows() * a.cols());
    return out;
}

DenseMatrix conjugate_scaled(const ScaledPermutation& q, const DenseMatrix& m, OpCounter* ops) {
    check(m.rows() == m.cols(), "conjugate_scaled: M must be square");
    check(m.rows() == q.size(), "conjugate_scaled: M size does not match Q");
    const std::size_t n = q.size();
    // (Q^T M Q)(pi(i), pi(j)) = s_i s_j M(i, j); multiply left scale first so
    // the rounding matches the dense Q^T * M * Q evaluation order exactly
    DenseMatrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out(q.perm[i], q.perm[j]) =
                static_cast<double>(q.scales[i]) * m(i, j) * static_cast<double>(q.scales[j]);
    if (ops) ops->add(2 * n * n);
    return out;
}

DenseMatrix unconjugate_scaled(const ScaledPermutation& q, const DenseMatrix& m, OpCounter* ops) {
    check(m.rows() == m.cols(), "unconjugate_scaled: M must be square");
    check(m.rows() == q.size(), "unconjugate_scaled: M size does not match Q");
    const std::size_t n = q.size();
    DenseMatrix out(n, n);
    // inverse of the conjugation in reverse order: divide by s_j, then s_i
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out(i, j) = m(q.perm[i], q.perm[j]) / static_cast<double>(q.scales[j]) /
                        static_cast<double>(q.scales[i]);
    if (ops) ops->add(2 * n * n);
    return out;
}

DenseMatrix dense_inverse(const DenseMatrix& m, OpCounter* ops) {
    check(m.rows() == m.cols(), "dense_inverse: M must be square");
    const std::size_t n = m.rows();
    constexpr double kPivotFloor = 1e-300;

    // In-place LU with partial pivoting on a working copy.
    DenseMatrix lu = m;
    std::vector<std::size_t> piv(n);
    std::uint64_t macs = 0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t best = k;
        double best_abs = std::fabs(lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            double v = std::fabs(lu(i, k));
            if (v > best_abs) {
                best_abs = v;
                best = i;
            }
        }
        if (best_abs < kPivotFloor)
            throw SingularMatrixError("dense_inverse: singular to working precision (pivot " +
                                      std::to_string(best_abs) + ")");
        piv[k] = best;
        if (best != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(best, j));
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= lu(k, k);
            const double f = lu(i, k);
            for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            macs += n - k;
        }
    }

    // Solve LU x = e_col for each column of the identity.
    DenseMatrix inv(n, n);
    std::vector<double> x(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::fill(x.begin(), x.end(), 0.0);
        x[col] = 1.0;
        for (std::size_t k = 0; k < n; ++k)
            if (piv[k] != k) std::swap(x[k], x[piv[k]]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
            x[i] /= lu(i, i);
        }
        for (std::size_t i = 0; i < n; ++i) inv(i, col) = x[i];
        macs += n * n;
    }
    if (ops) ops->add(macs);
    return inv;
}

std::vector<double> mat_vec(const DenseMatrix& a, std::span<const double> v, OpCounter* ops) {
    check(a.cols() == v.size(), "mat_vec: length mismatch");
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
        out[i] = s;
    }
    if (ops) ops->add(a.rows() * a.cols());
    return out;
}

}  // namespace pbls

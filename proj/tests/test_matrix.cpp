#include "doctest.h"

#include <cmath>

#include "pbls/matrix.hpp"
#include "test_util.hpp"

using namespace pbls;
using test::random_matrix;

namespace {

SignedPermutation identity_signed(std::size_t n) {
    SignedPermutation p;
    for (std::size_t i = 0; i < n; ++i) {
        p.perm.push_back(i);
        p.signs.push_back(1);
    }
    return p;
}

ScaledPermutation identity_scaled(std::size_t n) {
    ScaledPermutation q;
    for (std::size_t i = 0; i < n; ++i) {
        q.perm.push_back(i);
        q.scales.push_back(1);
    }
    return q;
}

SignedPermutation random_signed_perm(std::mt19937_64& rng, std::size_t n) {
    auto keys = generate_keys(n, 1, rng());
    return keys.p;
}

ScaledPermutation random_scaled_perm(std::mt19937_64& rng, std::size_t n, ScaleMode mode) {
    auto keys = generate_keys(1, n, rng(), mode);
    return keys.q;
}

}  // namespace

TEST_CASE("mat_mul basics") {
    DenseMatrix a(2, 2, {1, 2, 3, 4});

    SUBCASE("identity") {
        CHECK(mat_mul(a, DenseMatrix::identity(2)) == a);
    }
    SUBCASE("gram of the 2x2 example") {
        DenseMatrix g = mat_mul(a.transpose(), a);
        CHECK(g == DenseMatrix(2, 2, {10, 14, 14, 20}));
    }
    SUBCASE("1x1") {
        DenseMatrix x(1, 1, {2.0}), y(1, 1, {3.0});
        CHECK(mat_mul(x, y)(0, 0) == 6.0);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(mat_mul(a, DenseMatrix(3, 2)), DimensionError);
    }
    SUBCASE("op counting") {
        OpCounter ops;
        mat_mul(a, a, &ops);
        CHECK(ops.mul_adds == 8);
    }
}

TEST_CASE("mat_mul is invariant under row-order of the accumulation") {
    // The sum of each dot product depends only on the multiset of products.
    std::mt19937_64 rng(42);
    DenseMatrix a = random_matrix(rng, 17, 5);
    DenseMatrix perm_a(17, 5);
    std::vector<std::size_t> order(17);
    for (std::size_t i = 0; i < 17; ++i) order[i] = (i * 5 + 3) % 17;
    for (std::size_t i = 0; i < 17; ++i)
        for (std::size_t j = 0; j < 5; ++j) perm_a(i, j) = a(order[i], j);
    CHECK(mat_mul(a.transpose(), a) == mat_mul(perm_a.transpose(), perm_a));
}

TEST_CASE("apply_signed_left") {
    DenseMatrix a(2, 2, {1, 2, 3, 4});

    SUBCASE("identity keys") {
        CHECK(apply_signed_left(identity_signed(2), a) == a);
    }
    SUBCASE("swap rows") {
        SignedPermutation p{{1, 0}, {1, 1}};
        CHECK(apply_signed_left(p, a) == DenseMatrix(2, 2, {3, 4, 1, 2}));
    }
    SUBCASE("sign flip") {
        SignedPermutation p{{0, 1}, {-1, 1}};
        CHECK(apply_signed_left(p, a) == DenseMatrix(2, 2, {-1, -2, 3, 4}));
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(apply_signed_left(identity_signed(3), a), DimensionError);
    }
    SUBCASE("matches the dense-multiply oracle entry-exactly") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            std::size_t m = 1 + rng() % 32, n = 1 + rng() % 32;
            DenseMatrix x = random_matrix(rng, m, n);
            SignedPermutation p = random_signed_perm(rng, m);
            CHECK(apply_signed_left(p, x) == mat_mul(p.to_dense(), x));
        }
    }
}

TEST_CASE("apply_scaled_right") {
    SUBCASE("identity keys") {
        DenseMatrix a(2, 3, {1, 2, 3, 4, 5, 6});
        CHECK(apply_scaled_right(a, identity_scaled(3)) == a);
    }
    SUBCASE("column scaling") {
        DenseMatrix a(2, 2, {3, 4, 1, 2});
        ScaledPermutation q{{0, 1}, {1, 2}};
        CHECK(apply_scaled_right(a, q) == DenseMatrix(2, 2, {3, 8, 1, 4}));
    }
    SUBCASE("zero matrix stays zero") {
        std::mt19937_64 rng(9);
        ScaledPermutation q = random_scaled_perm(rng, 4, ScaleMode::Paper);
        CHECK(apply_scaled_right(DenseMatrix::zeros(3, 4), q) == DenseMatrix::zeros(3, 4));
    }
    SUBCASE("matches the dense-multiply oracle entry-exactly") {
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            std::size_t m = 1 + rng() % 32, n = 1 + rng() % 32;
            DenseMatrix x = random_matrix(rng, m, n);
            ScaledPermutation q = random_scaled_perm(rng, n, ScaleMode::Paper);
            CHECK(apply_scaled_right(x, q) == mat_mul(x, q.to_dense()));
        }
    }
}

TEST_CASE("conjugate_scaled and unconjugate_scaled") {
    SUBCASE("identity keys") {
        DenseMatrix m(2, 2, {1, 2, 3, 4});
        CHECK(conjugate_scaled(identity_scaled(2), m) == m);
        CHECK(unconjugate_scaled(identity_scaled(2), m) == m);
    }
    SUBCASE("scales (2,3) on all-ones") {
        DenseMatrix ones(2, 2, {1, 1, 1, 1});
        ScaledPermutation q{{0, 1}, {2, 3}};
        DenseMatrix conj = conjugate_scaled(q, ones);
        CHECK(conj == DenseMatrix(2, 2, {4, 6, 6, 9}));
        CHECK(unconjugate_scaled(q, conj) == ones);
    }
    SUBCASE("identity input becomes squared-scale diagonal") {
        ScaledPermutation q{{0, 1, 2}, {2, 3, 1}};
        DenseMatrix d = conjugate_scaled(q, DenseMatrix::identity(3));
        CHECK(d == DenseMatrix(3, 3, {4, 0, 0, 0, 9, 0, 0, 0, 1}));
    }
    SUBCASE("zero matrix") {
        ScaledPermutation q{{1, 0}, {3, -2}};
        CHECK(unconjugate_scaled(q, DenseMatrix::zeros(2, 2)) == DenseMatrix::zeros(2, 2));
    }
    SUBCASE("matches the dense oracle, and round-trips") {
        std::mt19937_64 rng(13);
        for (int trial = 0; trial < 40; ++trial) {
            std::size_t n = 1 + rng() % 24;
            bool pow2 = trial % 2 == 0;
            ScaledPermutation q =
                random_scaled_perm(rng, n, pow2 ? ScaleMode::Pow2 : ScaleMode::Paper);
            DenseMatrix m = random_matrix(rng, n, n);
            DenseMatrix qd = q.to_dense();
            DenseMatrix oracle = mat_mul(mat_mul(qd.transpose(), m), qd);
            DenseMatrix conj = conjugate_scaled(q, m);
            CHECK(DenseMatrix::max_abs_diff(conj, oracle) == 0.0);
            DenseMatrix back = unconjugate_scaled(q, conj);
            if (pow2) {
                CHECK(back == m);  // powers of two divide exactly
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        CHECK(std::fabs(back(i, j) - m(i, j)) <=
                              1e-12 * std::max(1.0, std::fabs(m(i, j))));
            }
        }
    }
}

TEST_CASE("signed permutation is orthogonal") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t m = 1 + rng() % 20;
        SignedPermutation p = random_signed_perm(rng, m);
        DenseMatrix pd = p.to_dense();
        CHECK(mat_mul(pd, pd.transpose()) == DenseMatrix::identity(m));
    }
}

TEST_CASE("dense_inverse") {
    SUBCASE("identity") {
        CHECK(dense_inverse(DenseMatrix::identity(3)) == DenseMatrix::identity(3));
    }
    SUBCASE("diagonal") {
        DenseMatrix d(2, 2, {2, 0, 0, 4});
        CHECK(dense_inverse(d) == DenseMatrix(2, 2, {0.5, 0, 0, 0.25}));
    }
    SUBCASE("zero matrix is singular") {
        CHECK_THROWS_AS(dense_inverse(DenseMatrix::zeros(2, 2)), SingularMatrixError);
    }
    SUBCASE("exactly dependent rows are singular") {
        DenseMatrix m(2, 2, {1, 2, 2, 4});
        CHECK_THROWS_AS(dense_inverse(m), SingularMatrixError);
    }
    SUBCASE("non-square rejected") {
        CHECK_THROWS_AS(dense_inverse(DenseMatrix(2, 3)), DimensionError);
    }
    SUBCASE("M * inv(M) ~ I on random well-conditioned inputs") {
        std::mt19937_64 rng(19);
        for (int trial = 0; trial < 30; ++trial) {
            std::size_t n = 2 + rng() % 63;
            DenseMatrix m = test::random_conditioned(rng, n, n);
            DenseMatrix prod = mat_mul(m, dense_inverse(m));
            CHECK(DenseMatrix::max_abs_diff(prod, DenseMatrix::identity(n)) < 1e-8);
        }
    }
}

TEST_CASE("mat_vec") {
    SUBCASE("identity") {
        std::vector<double> v{5, 7};
        CHECK(mat_vec(DenseMatrix::identity(2), v) == v);
    }
    SUBCASE("2x2 example") {
        DenseMatrix a(2, 2, {1, 2, 3, 4});
        std::vector<double> v{1, 1};
        CHECK(mat_vec(a, v) == std::vector<double>{3, 7});
    }
    SUBCASE("zero matrix") {
        CHECK(mat_vec(DenseMatrix::zeros(3, 2), std::vector<double>{1, 2}) ==
              std::vector<double>{0, 0, 0});
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(mat_vec(DenseMatrix::identity(2), std::vector<double>{1, 2, 3}),
                        DimensionError);
    }
}

TEST_CASE("matrix serialization round-trips and validates") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        DenseMatrix m = random_matrix(rng, 1 + rng() % 8, 1 + rng() % 8);
        CHECK(DenseMatrix::deserialize(m.serialize()) == m);
    }
    DenseMatrix m(1, 1, {0.0});
    auto bytes = m.serialize();
    CHECK(bytes.size() == 24);
    for (std::size_t i = 16; i < 24; ++i) CHECK(bytes[i] == 0);

    SUBCASE("truncated body") {
        bytes.pop_back();
        CHECK_THROWS_AS(DenseMatrix::deserialize(bytes), FormatError);
    }
    SUBCASE("truncated header") {
        CHECK_THROWS_AS(DenseMatrix::deserialize(std::span(bytes).first(10)), FormatError);
    }
}

TEST_CASE("permutation type invariants are enforced") {
    SignedPermutation bad_perm{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(bad_perm.validate(), InvalidArgument);
    SignedPermutation bad_sign{{0, 1}, {1, 2}};
    CHECK_THROWS_AS(bad_sign.validate(), InvalidArgument);
    ScaledPermutation zero_scale{{0, 1}, {1, 0}};
    CHECK_THROWS_AS(zero_scale.validate(), InvalidArgument);
    ScaledPermutation huge_scale{{0, 1}, {1, 100}};
    CHECK_THROWS_AS(huge_scale.validate(), InvalidArgument);
}

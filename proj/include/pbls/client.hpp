#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "pbls/keygen.hpp"
#include "pbls/matrix.hpp"
#include "pbls/protocol.hpp"

namespace pbls {

struct VerificationReport {
    bool accepted = false;
    std::size_t rounds = 0;
    double max_residual = 0.0;  // max over rounds of ||R4 A g - g||_inf / ||g||_inf
    double tolerance = 0.0;
};

struct ResultRejectedError : Error {
    ResultRejectedError(const std::string& msg, VerificationReport r)
        : Error(msg), report(r) {}
    VerificationReport report;
};

/// Masks A into A' = P A Q. O(rows*cols).
DenseMatrix transform1(const DenseMatrix& a, const MaskKeys& keys, OpCounter* ops = nullptr);

/// Unmasks the worker's Gram: A^T A = (Q^T)^-1 (A'^T A') Q^-1. O(n^2).
DenseMatrix recover1(const DenseMatrix& masked_gram, const MaskKeys& keys,
                     OpCounter* ops = nullptr);

/// R1 = lambda I + gram, then R2 = Q^T R1 Q. O(n^2).
DenseMatrix transform2(const DenseMatrix& gram, double lambda, const MaskKeys& keys,
                       OpCounter* ops = nullptr);

/// Unmasks the worker's inverse-product: R4 = Q R3 P. With an honest worker
/// this is (lambda I + A^T A)^-1 A^T. O(rows*cols).
DenseMatrix recover2(const DenseMatrix& r3, const MaskKeys& keys, OpCounter* ops = nullptr);

/// Randomized pseudoinverse check: per round, draw g with i.i.d. uniform
/// [-1,1] entries of length A.cols and accept iff
/// ||R4(Ag) - g||_inf <= tol * ||g||_inf. Requires rows >= cols: the identity
/// R4 A g = g needs A to have full column rank (A+ A = I).
VerificationReport verify(const DenseMatrix& r4, const DenseMatrix& a, std::size_t rounds,
                          double tol, std::mt19937_64& rng, OpCounter* ops = nullptr);

struct OutsourceOptions {
    double tol = 1e-6;
    std::size_t verify_rounds = 1;
    std::uint64_t verify_seed = 0x9e3779b97f4a7c15ull;
    std::uint64_t session_id = 0;
    std::size_t retries = 0;  // extra protocol attempts after a rejection
};

/// Client-side protocol state. Stages must run in order: transform1,
/// recover1, transform2, recover2, verify; violations throw StateError.
class OutsourceSession {
public:
    OutsourceSession(DenseMatrix a, MaskKeys keys, double lambda);

    const DenseMatrix& run_transform1();                       // -> A', send to worker
    const DenseMatrix& run_recover1(const DenseMatrix& masked_gram);
    const DenseMatrix& run_transform2();                       // -> R2, send to worker
    const DenseMatrix& run_recover2(const DenseMatrix& r3);
    VerificationReport run_verify(std::size_t rounds, double tol, std::mt19937_64& rng);

    const DenseMatrix& a() const { return a_; }
    const DenseMatrix& r4() const;
    std::uint64_t op_count() const { return ops_.mul_adds; }

private:
    enum class Stage : std::uint8_t { Init, Masked, GramRecovered, R2Ready, Recovered, Verified };
    void expect(Stage s, const char* what) const;

    MaskKeys keys_;
    double lambda_;
    DenseMatrix a_, a_prime_, gram_, r2_, r4_;
    Stage stage_ = Stage::Init;
    OpCounter ops_;
};

/// Remote rounds over a connected channel. Maps ERROR frames to exceptions
/// (singular -> SingularMatrixError, otherwise ProtocolError).
DenseMatrix remote_gram(Channel& ch, std::uint64_t session_id, const DenseMatrix& a_prime);
DenseMatrix remote_invprod(Channel& ch, std::uint64_t session_id, const DenseMatrix& r2);

/// The full outsourcing pipeline against a worker on `ch`. Returns R4 on
/// acceptance; throws ResultRejectedError after exhausting retries.
DenseMatrix outsourced_pinv(const DenseMatrix& a, double lambda, const MaskKeys& keys,
                            Channel& ch, const OutsourceOptions& opts = {},
                            OpCounter* client_ops = nullptr);

/// Local baseline: (lambda I + A^T A)^-1 A^T with no outsourcing.
DenseMatrix local_pinv(const DenseMatrix& a, double lambda, OpCounter* ops = nullptr);

}  // namespace pbls

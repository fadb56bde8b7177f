#include "pbls/client.hpp"

#include <algorithm>
#include <cmath>

namespace pbls {

DenseMatrix transform1(const DenseMatrix& a, const MaskKeys& keys, OpCounter* ops) {
    if (keys.p.size() != a.rows())
        throw DimensionError("transform1: P size does not match A rows");
    if (keys.q.size() != a.cols())
        throw DimensionError("transform1: Q size does not match A cols");
    return apply_scaled_right(apply_signed_left(keys.p, a, ops), keys.q, ops);
}

DenseMatrix recover1(const DenseMatrix& masked_gram, const MaskKeys& keys, OpCounter* ops) {
    return unconjugate_scaled(keys.q, masked_gram, ops);
}

DenseMatrix transform2(const DenseMatrix& gram, double lambda, const MaskKeys& keys,
                       OpCounter* ops) {
    if (gram.rows() != gram.cols()) throw DimensionError("transform2: gram must be square");
    if (lambda < 0.0) throw InvalidArgument("transform2: lambda must be nonnegative");
    DenseMatrix r1 = gram;
    for (std::size_t i = 0; i < r1.rows(); ++i) r1(i, i) += lambda;
    if (ops) ops->add(r1.rows());
    return conjugate_scaled(keys.q, r1, ops);
}

DenseMatrix recover2(const DenseMatrix& r3, const MaskKeys& keys, OpCounter* ops) {
    if (r3.rows() != keys.q.size() || r3.cols() != keys.p.size())
        throw DimensionError("recover2: R3 must be Q.size x P.size");
    // Q R3 as a row unpermute + scale, then (.) P as a column unpermute + sign.
    const auto& q = keys.q;
    const auto& p = keys.p;
    DenseMatrix qr3(r3.rows(), r3.cols());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double s = static_cast<double>(q.scales[i]);
        for (std::size_t j = 0; j < r3.cols(); ++j) qr3(i, j) = s * r3(q.perm[i], j);
    }
    DenseMatrix r4(r3.rows(), r3.cols());
    for (std::size_t j = 0; j < p.size(); ++j) {
        const double s = static_cast<double>(p.signs[j]);
        for (std::size_t i = 0; i < r3.rows(); ++i) r4(i, p.perm[j]) = s * qr3(i, j);
    }
    if (ops) ops->add(2 * r3.rows() * r3.cols());
    return r4;
}

VerificationReport verify(const DenseMatrix& r4, const DenseMatrix& a, std::size_t rounds,
                          double tol, std::mt19937_64& rng, OpCounter* ops) {
    if (a.rows() < a.cols())
        throw DimensionError(
            "verify: A must have at least as many rows as columns; the check R4*A*g = g "
            "requires full column rank (A+ A = I), which is impossible for rows < cols");
    if (r4.rows() != a.cols() || r4.cols() != a.rows())
        throw DimensionError("verify: R4 must have the shape of A^T");
    if (rounds == 0) throw InvalidArgument("verify: need at least one round");

    VerificationReport report;
    report.rounds = rounds;
    report.tolerance = tol;
    report.accepted = true;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t r = 0; r < rounds; ++r) {
        std::vector<double> gamma(a.cols());
        for (double& g : gamma) g = u(rng);
        double gamma_inf = 0.0;
        for (double g : gamma) gamma_inf = std::max(gamma_inf, std::fabs(g));
        std::vector<double> u_vec = mat_vec(a, gamma, ops);
        std::vector<double> v = mat_vec(r4, u_vec, ops);
        double resid = 0.0;
        for (std::size_t i = 0; i < gamma.size(); ++i)
            resid = std::max(resid, std::fabs(v[i] - gamma[i]));
        resid /= gamma_inf;
        report.max_residual = std::max(report.max_residual, resid);
        if (resid > tol) report.accepted = false;
    }
    return report;
}

OutsourceSession::OutsourceSession(DenseMatrix a, MaskKeys keys, double lambda)
    : keys_(std::move(keys)), lambda_(lambda), a_(std::move(a)) {
    if (keys_.p.size() != a_.rows() || keys_.q.size() != a_.cols())
        throw DimensionError("OutsourceSession: key sizes do not match A");
    if (lambda_ < 0.0) throw InvalidArgument("OutsourceSession: lambda must be nonnegative");
}

void OutsourceSession::expect(Stage s, const char* what) const {
    if (stage_ != s) throw StateError(std::string("OutsourceSession: ") + what +
                                      " called out of order");
}

const DenseMatrix& OutsourceSession::run_transform1() {
    expect(Stage::Init, "transform1");
    a_prime_ = transform1(a_, keys_, &ops_);
    stage_ = Stage::Masked;
    return a_prime_;
}

const DenseMatrix& OutsourceSession::run_recover1(const DenseMatrix& masked_gram) {
    expect(Stage::Masked, "recover1");
    if (masked_gram.rows() != a_.cols() || masked_gram.cols() != a_.cols())
        throw DimensionError("recover1: masked gram must be square of size A cols");
    gram_ = recover1(masked_gram, keys_, &ops_);
    stage_ = Stage::GramRecovered;
    return gram_;
}

const DenseMatrix& OutsourceSession::run_transform2() {
    expect(Stage::GramRecovered, "transform2");
    r2_ = transform2(gram_, lambda_, keys_, &ops_);
    stage_ = Stage::R2Ready;
    return r2_;
}

const DenseMatrix& OutsourceSession::run_recover2(const DenseMatrix& r3) {
    expect(Stage::R2Ready, "recover2");
    r4_ = recover2(r3, keys_, &ops_);
    stage_ = Stage::Recovered;
    return r4_;
}

VerificationReport OutsourceSession::run_verify(std::size_t rounds, double tol,
                                                std::mt19937_64& rng) {
    expect(Stage::Recovered, "verify");
    VerificationReport report = verify(r4_, a_, rounds, tol, rng, &ops_);
    stage_ = Stage::Verified;
    return report;
}

const DenseMatrix& OutsourceSession::r4() const {
    if (stage_ != Stage::Recovered && stage_ != Stage::Verified)
        throw StateError("OutsourceSession: R4 not yet recovered");
    return r4_;
}

namespace {

DenseMatrix remote_round(Channel& ch, std::uint64_t session_id, Opcode req_op, Opcode resp_op,
                         const DenseMatrix& payload) {
    Frame req;
    req.opcode = req_op;
    req.session_id = session_id;
    req.payload = payload.serialize();
    write_frame(ch, req);
    Frame resp;
    if (!read_frame(ch, resp))
        throw ProtocolError(ProtocolErrorKind::Transport, "worker closed the connection");
    if (resp.opcode == Opcode::Error) {
        auto [code, msg] = decode_error_payload(resp.payload);
        if (code == WireErrorCode::Singular) throw SingularMatrixError("worker: " + msg);
        throw ProtocolError(ProtocolErrorKind::RemoteError, "worker error: " + msg);
    }
    if (resp.opcode != resp_op)
        throw ProtocolError(ProtocolErrorKind::RemoteError, "unexpected response opcode");
    return DenseMatrix::deserialize(resp.payload);
}

}  // namespace

DenseMatrix remote_gram(Channel& ch, std::uint64_t session_id, const DenseMatrix& a_prime) {
    return remote_round(ch, session_id, Opcode::GramReq, Opcode::GramResp, a_prime);
}

DenseMatrix remote_invprod(Channel& ch, std::uint64_t session_id, const DenseMatrix& r2) {
    return remote_round(ch, session_id, Opcode::InvprodReq, Opcode::InvprodResp, r2);
}

DenseMatrix outsourced_pinv(const DenseMatrix& a, double lambda, const MaskKeys& keys,
                            Channel& ch, const OutsourceOptions& opts, OpCounter* client_ops) {
    if (a.rows() < a.cols())
        throw DimensionError("outsourced_pinv: requires rows >= cols (full column rank)");
    if (lambda <= 0.0) throw InvalidArgument("outsourced_pinv: lambda must be positive");

    std::mt19937_64 verify_rng(opts.verify_seed);
    VerificationReport last_report;
    for (std::size_t attempt = 0; attempt <= opts.retries; ++attempt) {
        OutsourceSession session(a, keys, lambda);
        const DenseMatrix& a_prime = session.run_transform1();
        DenseMatrix masked_gram = remote_gram(ch, opts.session_id, a_prime);
        session.run_recover1(masked_gram);
        const DenseMatrix& r2 = session.run_transform2();
        DenseMatrix r3 = remote_invprod(ch, opts.session_id, r2);
        session.run_recover2(r3);
        last_report = session.run_verify(opts.verify_rounds, opts.tol, verify_rng);
        if (client_ops) client_ops->add(session.op_count());
        if (last_report.accepted) return session.r4();
    }
    throw ResultRejectedError(
        "outsourced_pinv: verification rejected the worker's result (max residual " +
            std::to_string(last_report.max_residual) + ", tolerance " +
            std::to_string(last_report.tolerance) + ")",
        last_report);
}

DenseMatrix local_pinv(const DenseMatrix& a, double lambda, OpCounter* ops) {
    if (a.rows() < a.cols()) throw DimensionError("local_pinv: requires rows >= cols");
    if (lambda < 0.0) throw InvalidArgument("local_pinv: lambda must be nonnegative");
    DenseMatrix gram = mat_mul(a.transpose(), a, ops);
    for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
    return mat_mul(dense_inverse(gram, ops), a.transpose(), ops);
}

}  // namespace pbls

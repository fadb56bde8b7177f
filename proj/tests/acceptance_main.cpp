// Acceptance battery: one criterion per function, one PASS/FAIL line each.
// Every run is seeded; a failure prints the offending measurement.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <thread>

#include "pbls/bls.hpp"
#include "pbls/client.hpp"
#include "pbls/data.hpp"
#include "pbls/keygen.hpp"
#include "pbls/worker.hpp"

using namespace pbls;

namespace {

DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseMatrix a(rows, cols);
    for (double& x : a.data()) x = u(rng);
    return a;
}

// Diagonal boost keeps sigma_min >= ||G||_F, so inversion error stays far
// below the tolerances under test.
DenseMatrix random_conditioned(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    DenseMatrix g = random_matrix(rng, rows, cols);
    const double d = 2.0 * g.frobenius_norm();
    for (std::size_t i = 0; i < cols; ++i) g(i, i) += d;
    return g;
}

double rel_frob(const DenseMatrix& a, const DenseMatrix& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        num += d * d;
        den += b.data()[i] * b.data()[i];
    }
    return std::sqrt(num) / std::sqrt(den);
}

// --- 1. honest outsourcing matches the local baseline -----------------------

bool criterion1() {
    std::mt19937_64 rng(0xC1);
    auto [client_ch, worker_ch] = make_pipe();
    CloudWorker worker;
    std::thread wt([&worker, ch = std::move(worker_ch)]() mutable { worker.serve(*ch); });

    bool ok = true;
    std::uint64_t session = 0;
    for (int t = 0; t < 200 && ok; ++t) {
        const std::size_t rows = 8 + rng() % 57;       // [8, 64]
        const std::size_t cols = 2 + rng() % (rows - 1);  // [2, rows]
        DenseMatrix a = random_matrix(rng, rows, cols);
        DenseMatrix want = local_pinv(a, 1e-8);
        for (ScaleMode mode : {ScaleMode::Pow2, ScaleMode::Paper}) {
            MaskKeys keys = generate_keys(rows, cols, rng(), mode);
            OutsourceOptions opts;
            opts.session_id = ++session;
            opts.verify_seed = rng();
            // Raw uniform draws can be near-singular; the identity residual
            // lambda/sigma_min^2 then exceeds the generic tolerance even for
            // honest workers. The subject here is the Frobenius comparison.
            opts.tol = 1e-2;
            DenseMatrix got = outsourced_pinv(a, 1e-8, keys, *client_ch, opts);
            const double err = rel_frob(got, want);
            if (err > 1e-8) {
                std::printf("  [1] trial %d mode %s: rel error %.3e > 1e-8\n", t,
                            to_string(mode).c_str(), err);
                ok = false;
            }
        }
    }
    client_ch->close();
    wt.join();
    return ok;
}

// --- 2. mask round-trip of the Gram round -----------------------------------

bool criterion2() {
    std::mt19937_64 rng(0xC2);
    CloudWorker worker;
    bool ok = true;
    for (int t = 0; t < 1000 && ok; ++t) {
        const std::size_t rows = 8 + rng() % 57;
        const std::size_t cols = 2 + rng() % (rows - 1);
        DenseMatrix a = random_matrix(rng, rows, cols);
        DenseMatrix want = mat_mul(a.transpose(), a);

        MaskKeys k2 = generate_keys(rows, cols, rng(), ScaleMode::Pow2);
        DenseMatrix got2 = recover1(worker.handle_gram(2 * t, transform1(a, k2)), k2);
        if (!(got2 == want)) {
            std::printf("  [2] trial %d: pow2 round-trip not bit-exact (max diff %.3e)\n", t,
                        DenseMatrix::max_abs_diff(got2, want));
            ok = false;
        }

        MaskKeys kp = generate_keys(rows, cols, rng(), ScaleMode::Paper);
        DenseMatrix gotp = recover1(worker.handle_gram(2 * t + 1, transform1(a, kp)), kp);
        const double err = rel_frob(gotp, want);
        if (err > 1e-12) {
            std::printf("  [2] trial %d: paper-mode rel error %.3e > 1e-12\n", t, err);
            ok = false;
        }
    }
    return ok;
}

// --- 3. verification completeness and soundness ------------------------------

bool criterion3() {
    std::mt19937_64 rng(0xC3);
    const std::size_t kRounds = 3;  // drives the per-trial miss probability below 1e-9
    bool ok = true;

    for (int t = 0; t < 10000 && ok; ++t) {
        const std::size_t cols = 8 + rng() % 25;  // [8, 32]
        const std::size_t rows = cols + rng() % (33 - cols);
        DenseMatrix a = random_conditioned(rng, rows, cols);
        MaskKeys keys = generate_keys(rows, cols, rng());
        CloudWorker worker;
        OutsourceSession s(a, keys, 1e-8);
        s.run_recover1(worker.handle_gram(0, s.run_transform1()));
        s.run_recover2(worker.handle_invprod(0, s.run_transform2()));
        VerificationReport rep = s.run_verify(kRounds, 1e-6, rng);
        if (!rep.accepted) {
            std::printf("  [3] honest trial %d rejected, residual %.3e\n", t, rep.max_residual);
            ok = false;
        }
    }

    std::uniform_real_distribution<double> mag(1e-3, 1e-2);
    for (int t = 0; t < 10000 && ok; ++t) {
        const std::size_t cols = 8 + rng() % 25;
        const std::size_t rows = cols + rng() % (33 - cols);
        DenseMatrix a = random_conditioned(rng, rows, cols);
        MaskKeys keys = generate_keys(rows, cols, rng());
        CloudWorker worker;
        OutsourceSession s(a, keys, 1e-8);
        s.run_recover1(worker.handle_gram(0, s.run_transform1()));
        DenseMatrix r3 = worker.handle_invprod(0, s.run_transform2());
        const std::size_t idx = rng() % r3.data().size();
        r3.data()[idx] += (rng() & 1 ? 1.0 : -1.0) * mag(rng);
        s.run_recover2(r3);
        VerificationReport rep = s.run_verify(kRounds, 1e-6, rng);
        if (rep.accepted) {
            std::printf("  [3] perturbed trial %d accepted, residual %.3e\n", t,
                        rep.max_residual);
            ok = false;
        }
    }
    return ok;
}

// --- 4 & 5. complexity slopes and phase ordering -----------------------------

struct ScalingRow {
    std::size_t n;
    std::uint64_t client_ops, worker_ops;
    double transform_recover_ms, verify_ms;
};

std::vector<ScalingRow> run_scaling() {
    using Clock = std::chrono::steady_clock;
    std::vector<ScalingRow> rows;
    for (std::size_t n : {64ul, 128ul, 256ul, 512ul, 1024ul}) {
        std::mt19937_64 rng(0xC4 + n);
        DenseMatrix a = random_conditioned(rng, n, n);
        MaskKeys keys = generate_keys(n, n, 0xC4 ^ n);
        CloudWorker worker;

        OutsourceSession counted(a, keys, 1e-8);
        DenseMatrix masked_gram = worker.handle_gram(n, counted.run_transform1());
        counted.run_recover1(masked_gram);
        DenseMatrix r3 = worker.handle_invprod(n, counted.run_transform2());
        counted.run_recover2(r3);
        std::mt19937_64 vrng(0xC4 ^ (n << 1));
        counted.run_verify(1, 1e-6, vrng);

        // Criterion 5 timings: replay the cached worker responses so only the
        // client phases are measured; median of 5 after one warm-up pass.
        std::vector<double> tr_ms, ver_ms;
        for (int rep = 0; rep <= 5; ++rep) {
            OutsourceSession s(a, keys, 1e-8);
            auto t0 = Clock::now();
            s.run_transform1();
            s.run_recover1(masked_gram);
            s.run_transform2();
            s.run_recover2(r3);
            auto t1 = Clock::now();
            std::mt19937_64 r2(0xC5 ^ n ^ static_cast<std::uint64_t>(rep));
            s.run_verify(1, 1e-6, r2);
            auto t2 = Clock::now();
            if (rep == 0) continue;
            tr_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            ver_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        }
        std::sort(tr_ms.begin(), tr_ms.end());
        std::sort(ver_ms.begin(), ver_ms.end());

        rows.push_back({n, counted.op_count(), worker.ops().mul_adds, tr_ms[tr_ms.size() / 2],
                        ver_ms[ver_ms.size() / 2]});
    }
    return rows;
}

double loglog_slope(const std::vector<ScalingRow>& rows, bool client) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(rows.size());
    for (const ScalingRow& r : rows) {
        const double x = std::log(static_cast<double>(r.n));
        const double y = std::log(static_cast<double>(client ? r.client_ops : r.worker_ops));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

bool criterion4(const std::vector<ScalingRow>& rows) {
    const double client = loglog_slope(rows, true);
    const double worker = loglog_slope(rows, false);
    std::printf("  [4] client slope %.3f (need <= 2.2), worker slope %.3f (need >= 2.8)\n",
                client, worker);
    return client <= 2.2 && worker >= 2.8;
}

bool criterion5(const std::vector<ScalingRow>& rows) {
    bool ok = true;
    for (const ScalingRow& r : rows) {
        std::printf("  [5] n=%-5zu transform+recover %.3f ms, verify %.3f ms\n", r.n,
                    r.transform_recover_ms, r.verify_ms);
        if (r.transform_recover_ms <= r.verify_ms) ok = false;
    }
    return ok;
}

// --- 6 & 7. BLS backend parity and ridge optimality --------------------------

struct SweepResult {
    bool parity_ok = true;
    bool ridge_ok = true;
};

// Contiguous halves; the generator interleaves classes row-by-row, so both
// halves are class-balanced.
Dataset half_split(const Dataset& all, std::size_t half) {
    Dataset d;
    const std::size_t rows = all.x.rows() / 2;
    const std::size_t base = half * rows;
    d.x = DenseMatrix(rows, all.x.cols());
    d.y = DenseMatrix(rows, all.y.cols());
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < all.x.cols(); ++j) d.x(i, j) = all.x(base + i, j);
        for (std::size_t j = 0; j < all.y.cols(); ++j) d.y(i, j) = all.y(base + i, j);
        d.labels.push_back(all.labels[base + i]);
    }
    return d;
}

// Residual of the normal equations (lambda I + A^T A) W = A^T Y for the
// trained weights, relative to ||A^T Y||_F.
double ridge_residual(const BlsModel& model, const Dataset& train_set, double lambda) {
    DenseMatrix z = build_feature_nodes(train_set.x, model);
    DenseMatrix a = assemble_design(z, build_enhancement_nodes(z, model));
    DenseMatrix gram = mat_mul(a.transpose(), a);
    for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
    DenseMatrix lhs = mat_mul(gram, model.output_weights());
    DenseMatrix rhs = mat_mul(a.transpose(), train_set.y);
    return rel_frob(lhs, rhs);
}

SweepResult bls_sweep() {
    SweepResult res;
    // Sigmoid features plus a saturating enhancement scale keep the design
    // matrix far from rank deficiency, which the verification identity needs.
    BlsConfig cfg;
    cfg.n_feature_groups = 2;
    cfg.nodes_per_feature_group = 4;
    cfg.n_enh_groups = 2;
    cfg.nodes_per_enh_group = 4;
    cfg.feature_activation = Activation::Sigmoid;
    cfg.enhancement_scale = 4.0;

    auto [client_ch, worker_ch] = make_pipe();
    CloudWorker worker;
    std::thread wt([&worker, ch = std::move(worker_ch)]() mutable { worker.serve(*ch); });

    PinvBackend local = [](const DenseMatrix& a, double l) { return local_pinv(a, l); };
    double max_diff_pp = 0.0, min_acc = 1.0, max_resid = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Dataset all = synthetic_blobs(2, 400, 8, 6.0, 0xB70 + seed);
        Dataset train_set = half_split(all, 0);
        Dataset test_set = half_split(all, 1);

        Channel* ch = client_ch.get();
        PinvBackend remote = [ch, seed](const DenseMatrix& a, double l) {
            MaskKeys keys = generate_keys(a.rows(), a.cols(), 0xB70000 + seed);
            OutsourceOptions opts;
            opts.session_id = seed;
            opts.verify_seed = 0xB7DEAD + seed;
            // The smallest singular values of a random-feature design matrix
            // sit near zero, so the identity R4*A*g = g only holds to about
            // lambda/sigma_min^2 (~5e-3 honest worst case here). Rejection
            // behavior is exercised by the dedicated soundness criterion.
            opts.tol = 0.05;
            return outsourced_pinv(a, l, keys, *ch, opts);
        };

        BlsModel ml = train(train_set, cfg, seed, local);
        BlsModel mo = train(train_set, cfg, seed, remote);
        const double acc_l = evaluate(ml, test_set);
        const double acc_o = evaluate(mo, test_set);
        const double diff_pp = std::fabs(acc_l - acc_o) * 100.0;
        max_diff_pp = std::max(max_diff_pp, diff_pp);
        min_acc = std::min(min_acc, std::min(acc_l, acc_o));
        if (diff_pp > 0.5 || std::min(acc_l, acc_o) < 0.95) {
            std::printf("  [6] seed %llu: local %.4f outsourced %.4f\n",
                        static_cast<unsigned long long>(seed), acc_l, acc_o);
            res.parity_ok = false;
        }
        for (const BlsModel* m : {&ml, &mo}) {
            const double resid = ridge_residual(*m, train_set, cfg.lambda);
            max_resid = std::max(max_resid, resid);
            if (resid > 1e-6) {
                std::printf("  [7] seed %llu: ridge residual %.3e > 1e-6\n",
                            static_cast<unsigned long long>(seed), resid);
                res.ridge_ok = false;
            }
        }
    }
    client_ch->close();
    wt.join();
    std::printf("  [6] max accuracy gap %.3f pp, min accuracy %.4f\n", max_diff_pp, min_acc);
    std::printf("  [7] max ridge residual %.3e\n", max_resid);
    return res;
}

// --- 8. key-space uniformity --------------------------------------------------

bool criterion8() {
    CensusResult census = key_space_census(3, 48000, 0xC8);
    std::printf("  [8] keyspace %zu, chi-square %.2f, p-value %.4f\n", census.keyspace_size,
                census.chi_square, census.p_value);
    return census.keyspace_size == 48 && census.p_value > 0.001;
}

// --- 9. protocol robustness ----------------------------------------------------

bool criterion9() {
    std::mt19937_64 rng(0xC9);
    bool ok = true;
    const Opcode opcodes[] = {Opcode::GramReq, Opcode::GramResp, Opcode::InvprodReq,
                              Opcode::InvprodResp, Opcode::Error};
    for (int t = 0; t < 10000 && ok; ++t) {
        Frame f;
        f.opcode = opcodes[rng() % 5];
        f.session_id = rng();
        f.payload.resize(rng() % 512);
        for (std::uint8_t& b : f.payload) b = static_cast<std::uint8_t>(rng());
        Frame g = decode_frame(encode_frame(f));
        if (!(g == f)) {
            std::printf("  [9] frame round-trip mismatch at trial %d\n", t);
            ok = false;
        }
    }

    auto expect_kind = [&](std::vector<std::uint8_t> bytes, ProtocolErrorKind kind,
                           const char* what) {
        try {
            decode_frame(bytes);
        } catch (const ProtocolError& e) {
            if (e.kind == kind) return;
        } catch (...) {
        }
        std::printf("  [9] %s: wrong or missing typed error\n", what);
        ok = false;
    };
    std::vector<std::uint8_t> good = encode_frame({Opcode::GramReq, 7, {1, 2, 3}});
    auto bad = good;
    bad[0] = 'X';
    expect_kind(bad, ProtocolErrorKind::BadMagic, "bad magic");
    bad = good;
    bad[4] = 99;
    expect_kind(bad, ProtocolErrorKind::UnsupportedVersion, "bad version");
    bad = good;
    bad[5] = 0x7E;
    expect_kind(bad, ProtocolErrorKind::UnknownOpcode, "unknown opcode");
    bad = good;
    bad.pop_back();
    expect_kind(bad, ProtocolErrorKind::Truncated, "truncated");

    // Semantic failures must come back as typed ERROR frames.
    CloudWorker worker;
    DenseMatrix singular = DenseMatrix::zeros(3, 3);
    Frame resp = worker.handle_frame({Opcode::InvprodReq, 42, singular.serialize()});
    if (resp.opcode != Opcode::Error ||
        decode_error_payload(resp.payload).first != WireErrorCode::NoSession) {
        std::printf("  [9] missing session: expected ERROR code 3\n");
        ok = false;
    }
    worker.handle_gram(42, DenseMatrix::identity(3));
    resp = worker.handle_frame({Opcode::InvprodReq, 42, singular.serialize()});
    if (resp.opcode != Opcode::Error ||
        decode_error_payload(resp.payload).first != WireErrorCode::Singular) {
        std::printf("  [9] singular R2: expected ERROR code 2\n");
        ok = false;
    }
    resp = worker.handle_frame({Opcode::GramReq, 1, {1, 2, 3}});  // garbage payload
    if (resp.opcode != Opcode::Error ||
        decode_error_payload(resp.payload).first != WireErrorCode::Malformed) {
        std::printf("  [9] malformed payload: expected ERROR code 1\n");
        ok = false;
    }
    return ok;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&failures](int num, const char* name, bool pass) {
        std::printf("criterion %d (%s): %s\n", num, name, pass ? "PASS" : "FAIL");
        if (!pass) ++failures;
        std::fflush(stdout);
    };

    report(1, "oracle equivalence", criterion1());
    report(2, "mask round-trip", criterion2());
    report(3, "verification completeness/soundness", criterion3());
    std::vector<ScalingRow> scaling = run_scaling();
    report(4, "client/worker complexity slopes", criterion4(scaling));
    report(5, "phase ordering", criterion5(scaling));
    SweepResult sweep = bls_sweep();
    report(6, "BLS backend parity", sweep.parity_ok);
    report(7, "ridge optimality", sweep.ridge_ok);
    report(8, "key-space uniformity", criterion8());
    report(9, "protocol robustness", criterion9());

    if (failures) std::printf("%d criterion(s) FAILED\n", failures);
    return failures ? 1 : 0;
}

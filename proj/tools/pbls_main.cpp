// Command-line front end: key generation, outsourced/local pseudoinverse,
// BLS training, the scaling benchmark, and the verification demo.
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "pbls/bls.hpp"
#include "pbls/client.hpp"
#include "pbls/data.hpp"
#include "pbls/keygen.hpp"
#include "pbls/worker.hpp"

using namespace pbls;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::pair<std::string, std::uint16_t> parse_addr(const std::string& addr) {
    auto pos = addr.rfind(':');
    if (pos == std::string::npos) return {addr, default_port()};
    return {addr.substr(0, pos),
            static_cast<std::uint16_t>(std::stoi(addr.substr(pos + 1)))};
}

// In-process worker over a pipe, for commands that need a worker but were
// not pointed at one.
struct LocalWorker {
    std::unique_ptr<Channel> client_ch;
    CloudWorker worker;
    std::thread thread;

    explicit LocalWorker(FaultMode fault) : worker(fault) {
        auto [c, w] = make_pipe();
        client_ch = std::move(c);
        thread = std::thread([this, ch = std::move(w)]() mutable { worker.serve(*ch); });
    }
    ~LocalWorker() {
        client_ch->close();
        thread.join();
    }
};

FaultMode fault_from_env_or(const std::string& flag_value) {
    if (const char* env = std::getenv("PBLS_FAULT_MODE")) return FaultMode::parse(env);
    return FaultMode::parse(flag_value);
}

DenseMatrix random_conditioned(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseMatrix g(rows, cols);
    for (double& x : g.data()) x = u(rng);
    const double d = 2.0 * g.frobenius_norm();
    for (std::size_t i = 0; i < cols; ++i) g(i, i) += d;
    return g;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

int cmd_keygen(std::size_t m, std::size_t n, std::uint64_t seed, const std::string& mode,
               const std::string& export_path) {
    MaskKeys keys = generate_keys(m, n, seed, parse_scale_mode(mode));
    std::cout << "generated keys: P size " << m << ", Q size " << n << ", seed " << seed
              << ", scale mode " << mode << "\n";
    if (!export_path.empty()) {
        write_file(export_path, serialize_keys(keys));
        std::cout << "WARNING: exported raw key material to " << export_path
                  << " (debug only; anyone with this file can unmask your data)\n";
    }
    return 0;
}

int cmd_pinv(const std::string& input, double lambda, std::uint64_t seed,
             const std::string& worker_addr, const std::string& mode,
             std::size_t verify_rounds, const std::string& out, bool local) {
    DenseMatrix a = DenseMatrix::deserialize(read_file(input));
    DenseMatrix result;
    if (local) {
        result = local_pinv(a, lambda);
    } else {
        MaskKeys keys = generate_keys(a.rows(), a.cols(), seed, parse_scale_mode(mode));
        OutsourceOptions opts;
        opts.verify_rounds = verify_rounds;
        opts.verify_seed = seed ^ 0xabcdef12345ull;
        if (worker_addr.empty()) {
            LocalWorker lw(FaultMode::honest());
            result = outsourced_pinv(a, lambda, keys, *lw.client_ch, opts);
        } else {
            auto [host, port] = parse_addr(worker_addr);
            auto ch = tcp_connect(host, port);
            result = outsourced_pinv(a, lambda, keys, *ch, opts);
        }
    }
    if (!out.empty()) {
        write_file(out, result.serialize());
        std::cout << "wrote " << result.rows() << "x" << result.cols() << " result to " << out
                  << "\n";
    } else {
        std::cout << "computed " << result.rows() << "x" << result.cols()
                  << " pseudoinverse (use --out to save it)\n";
    }
    return 0;
}

int cmd_train(bool synthetic, const std::string& train_images, const std::string& train_labels,
              const std::string& test_images, const std::string& test_labels,
              const std::string& backend, const std::string& worker_addr,
              const std::string& fault_mode, std::uint64_t seed, double lambda,
              const std::string& scale_mode, const std::string& model_out) {
    Dataset train_set, test_set;
    if (synthetic) {
        // 200+200 per split; rows interleave classes, so contiguous halves
        // are class-balanced.
        Dataset all = synthetic_blobs(2, 400, 8, 6.0, seed);
        auto take = [&](std::size_t half) {
            Dataset d;
            std::size_t rows = all.x.rows() / 2;
            std::size_t base = half * rows;
            d.x = DenseMatrix(rows, all.x.cols());
            d.y = DenseMatrix(rows, all.y.cols());
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < all.x.cols(); ++j) d.x(i, j) = all.x(base + i, j);
                for (std::size_t j = 0; j < all.y.cols(); ++j) d.y(i, j) = all.y(base + i, j);
                d.labels.push_back(all.labels[base + i]);
            }
            return d;
        };
        train_set = take(0);
        test_set = take(1);
    } else {
        NormStats stats;
        train_set = to_dataset(load_idx(train_images, train_labels), nullptr, &stats);
        if (!test_images.empty())
            test_set = to_dataset(load_idx(test_images, test_labels), &stats);
        else
            test_set = train_set;
    }

    // Sigmoid features and a saturating enhancement scale keep the design
    // matrix well-conditioned enough for the verification identity.
    BlsConfig cfg;
    cfg.n_feature_groups = 2;
    cfg.nodes_per_feature_group = 4;
    cfg.n_enh_groups = 2;
    cfg.nodes_per_enh_group = 4;
    cfg.lambda = lambda;
    cfg.feature_activation = Activation::Sigmoid;
    cfg.enhancement_scale = 4.0;

    PinvBackend pinv;
    std::unique_ptr<LocalWorker> lw;
    std::unique_ptr<Channel> tcp_ch;
    if (backend == "local") {
        pinv = [](const DenseMatrix& a, double l) { return local_pinv(a, l); };
    } else if (backend == "outsourced") {
        Channel* ch;
        if (worker_addr.empty()) {
            lw = std::make_unique<LocalWorker>(fault_from_env_or(fault_mode));
            ch = lw->client_ch.get();
        } else {
            auto [host, port] = parse_addr(worker_addr);
            tcp_ch = tcp_connect(host, port);
            ch = tcp_ch.get();
        }
        ScaleMode sm = parse_scale_mode(scale_mode);
        pinv = [ch, seed, sm](const DenseMatrix& a, double l) {
            MaskKeys keys = generate_keys(a.rows(), a.cols(), seed ^ 0x5eed, sm);
            OutsourceOptions opts;
            opts.verify_seed = seed ^ 0x9e3779b9;
            // Random-feature design matrices have near-zero smallest singular
            // values, so the honest verification residual reaches ~1e-3.
            opts.tol = 0.05;
            return outsourced_pinv(a, l, keys, *ch, opts);
        };
    } else {
        std::cerr << "unknown backend: " << backend << "\n";
        return 2;
    }

    auto t0 = Clock::now();
    BlsModel model = train(train_set, cfg, seed, pinv);
    double train_ms = ms_since(t0);
    double acc = evaluate(model, test_set);

    std::cout << "backend=" << backend << " seed=" << seed
              << " feature_nodes=" << cfg.feature_width() << " enh_nodes=" << cfg.enh_width()
              << " train_ms=" << train_ms << " accuracy=" << acc << "\n";
    if (!model_out.empty()) {
        write_file(model_out, model.serialize());
        std::cout << "saved model to " << model_out << "\n";
    }
    return 0;
}

int cmd_bench_scaling(const std::vector<std::size_t>& sizes, std::size_t reps,
                      std::uint64_t seed, double lambda, const std::string& scale_mode,
                      std::size_t verify_rounds, const std::string& out_path) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw FormatError("cannot open " + out_path);
        out = &file;
    }
    *out << "schema,n,client_mul_adds,worker_mul_adds,transform_recover_ms,verify_ms,"
            "client_total_ms,worker_ms,local_baseline_ms\n";

    ScaleMode sm = parse_scale_mode(scale_mode);
    for (std::size_t n : sizes) {
        std::mt19937_64 rng(seed + n);
        DenseMatrix a = random_conditioned(rng, n, n);
        MaskKeys keys = generate_keys(n, n, seed + 7 * n, sm);
        CloudWorker worker;

        // One full exchange for counters and worker timing; the worker
        // responses are then replayed to time the client phases.
        auto tw = Clock::now();
        OutsourceSession counted(a, keys, lambda);
        DenseMatrix masked_gram = worker.handle_gram(n, counted.run_transform1());
        counted.run_recover1(masked_gram);
        DenseMatrix r3 = worker.handle_invprod(n, counted.run_transform2());
        counted.run_recover2(r3);
        std::mt19937_64 vrng(seed ^ n);
        counted.run_verify(verify_rounds, 1e-6, vrng);
        double worker_ms = ms_since(tw);  // includes client phases; dominated by the cubic work

        std::vector<double> tr_ms, ver_ms;
        for (std::size_t rep = 0; rep < reps + 1; ++rep) {  // first pass is warm-up
            OutsourceSession s(a, keys, lambda);
            auto t0 = Clock::now();
            s.run_transform1();
            s.run_recover1(masked_gram);
            s.run_transform2();
            s.run_recover2(r3);
            double t_transform = ms_since(t0);
            std::mt19937_64 r2(seed ^ n ^ rep);
            auto t1 = Clock::now();
            s.run_verify(verify_rounds, 1e-6, r2);
            double t_verify = ms_since(t1);
            if (rep == 0) continue;
            tr_ms.push_back(t_transform);
            ver_ms.push_back(t_verify);
        }

        auto tl = Clock::now();
        local_pinv(a, lambda);
        double local_ms = ms_since(tl);

        double tr = median(tr_ms), ver = median(ver_ms);
        *out << "pbls.bench.v1," << n << "," << counted.op_count() << ","
             << worker.ops().mul_adds << "," << tr << "," << ver << "," << (tr + ver) << ","
             << worker_ms << "," << local_ms << "\n";
        out->flush();
    }
    return 0;
}

int cmd_verify_demo(std::size_t trials, const std::string& fault, double perturb_eps,
                    std::size_t size_min, std::size_t size_max, std::uint64_t seed,
                    double lambda, double tol, std::size_t verify_rounds) {
    FaultMode fm = FaultMode::parse(fault);
    if (fm.kind == FaultMode::Kind::Perturb) fm.epsilon = perturb_eps;
    std::mt19937_64 rng(seed);
    std::size_t accepted = 0, rejected = 0;
    double min_resid = 1e300, max_resid = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t cols = size_min + rng() % (size_max - size_min + 1);
        std::size_t rows = cols + rng() % (size_max - cols + 1);
        DenseMatrix a = random_conditioned(rng, rows, cols);
        MaskKeys keys = generate_keys(rows, cols, rng());
        CloudWorker worker(fm, rng());
        OutsourceSession s(a, keys, lambda);
        s.run_recover1(worker.handle_gram(t, s.run_transform1()));
        s.run_recover2(worker.handle_invprod(t, s.run_transform2()));
        VerificationReport rep = s.run_verify(verify_rounds, tol, rng);
        (rep.accepted ? accepted : rejected) += 1;
        min_resid = std::min(min_resid, rep.max_residual);
        max_resid = std::max(max_resid, rep.max_residual);
    }
    std::cout << "fault mode: " << fm.to_string() << "\n"
              << "trials: " << trials << "  accepted: " << accepted
              << "  rejected: " << rejected << "\n"
              << "residual range: [" << min_resid << ", " << max_resid << "]  tolerance: " << tol
              << "\n";
    if (fm.kind == FaultMode::Kind::Perturb && max_resid <= tol)
        std::cout << "note: perturbations below the tolerance are accepted by design; "
                     "the check bounds detectable error by tol*||gamma||\n";
    return 0;
}

int cmd_cloud_worker(const std::string& listen, const std::string& fault) {
    auto [host, port] = parse_addr(listen);
    FaultMode fm = fault_from_env_or(fault);
    TcpListener listener(host, port);
    std::cerr << "cloud-worker listening on " << host << ":" << listener.port()
              << " fault-mode " << fm.to_string() << "\n";
    while (true) {
        auto ch = listener.accept();
        std::thread([fm, c = std::move(ch)]() mutable {
            CloudWorker worker(fm);
            try {
                worker.serve(*c);
            } catch (const std::exception& e) {
                std::cerr << "connection error: " << e.what() << "\n";
            }
        }).detach();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Verifiable outsourced ridge-pseudoinverse and BLS trainer"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    double lambda = 1e-8;
    std::string scale_mode = "pow2";
    std::size_t verify_rounds = 1;

    // keygen
    auto* kg = app.add_subcommand("keygen", "Sample masking keys");
    std::size_t kg_m = 8, kg_n = 8;
    std::string kg_export;
    kg->add_option("--m", kg_m, "Row key size");
    kg->add_option("--n", kg_n, "Column key size");
    kg->add_option("--seed", seed, "PRNG seed");
    kg->add_option("--scale-mode", scale_mode, "pow2|paper");
    kg->add_option("--export-keys", kg_export, "Write raw keys to a file (insecure, debug only)");

    // pinv
    auto* pv = app.add_subcommand("pinv", "Ridge pseudoinverse of a serialized matrix");
    std::string pv_input, pv_worker, pv_out;
    bool pv_local = false;
    pv->add_option("--input", pv_input, "Matrix file (binary serialization)")->required();
    pv->add_option("--lambda", lambda, "Ridge coefficient");
    pv->add_option("--seed", seed, "Key/verification seed");
    pv->add_option("--worker", pv_worker, "Worker address host:port (default: in-process)");
    pv->add_option("--scale-mode", scale_mode, "pow2|paper");
    pv->add_option("--verify-rounds", verify_rounds, "Independent verification rounds");
    pv->add_option("--out", pv_out, "Output matrix file");
    pv->add_flag("--local", pv_local, "Compute locally, no outsourcing");

    // train
    auto* tr = app.add_subcommand("train", "Train a BLS model");
    bool tr_synth = false;
    std::string tr_timg, tr_tlab, tr_eimg, tr_elab, tr_backend = "local", tr_worker,
                tr_fault = "honest", tr_model_out;
    tr->add_flag("--synthetic", tr_synth, "Use the synthetic blob benchmark");
    tr->add_option("--train-images", tr_timg, "IDX training images");
    tr->add_option("--train-labels", tr_tlab, "IDX training labels");
    tr->add_option("--test-images", tr_eimg, "IDX test images");
    tr->add_option("--test-labels", tr_elab, "IDX test labels");
    tr->add_option("--backend", tr_backend, "local|outsourced");
    tr->add_option("--worker", tr_worker, "Worker address (outsourced backend)");
    tr->add_option("--fault-mode", tr_fault, "In-process worker fault mode");
    tr->add_option("--seed", seed, "Model/key seed");
    tr->add_option("--lambda", lambda, "Ridge coefficient");
    tr->add_option("--scale-mode", scale_mode, "pow2|paper");
    tr->add_option("--model-out", tr_model_out, "Save the trained model here");

    // bench-scaling
    auto* bs = app.add_subcommand("bench-scaling", "Client/worker scaling study, CSV output");
    std::vector<std::size_t> bs_sizes{64, 128, 256, 512, 1024};
    std::size_t bs_reps = 5;
    std::string bs_out;
    bs->add_option("--sizes", bs_sizes, "Matrix sizes to benchmark");
    bs->add_option("--reps", bs_reps, "Timing repetitions (median reported)");
    bs->add_option("--seed", seed, "PRNG seed");
    bs->add_option("--lambda", lambda, "Ridge coefficient");
    bs->add_option("--scale-mode", scale_mode, "pow2|paper");
    bs->add_option("--verify-rounds", verify_rounds, "Verification rounds");
    bs->add_option("--out", bs_out, "CSV output path (default stdout)");

    // verify-demo
    auto* vd = app.add_subcommand("verify-demo", "Acceptance/rejection statistics per fault mode");
    std::size_t vd_trials = 1000, vd_min = 8, vd_max = 32;
    std::string vd_fault = "honest";
    double vd_eps = 1e-3, vd_tol = 1e-6;
    vd->add_option("--trials", vd_trials, "Number of trials");
    vd->add_option("--fault", vd_fault, "honest|perturb:<eps>|random|lazy");
    vd->add_option("--perturb", vd_eps, "Perturbation magnitude for perturb mode");
    vd->add_option("--size-min", vd_min, "Smallest matrix size");
    vd->add_option("--size-max", vd_max, "Largest matrix size");
    vd->add_option("--seed", seed, "PRNG seed");
    vd->add_option("--lambda", lambda, "Ridge coefficient");
    vd->add_option("--tol", vd_tol, "Verification tolerance");
    vd->add_option("--verify-rounds", verify_rounds, "Verification rounds");

    // cloud-worker
    auto* cw = app.add_subcommand("cloud-worker", "Run the worker over TCP");
    std::string cw_listen = "0.0.0.0", cw_fault = "honest";
    cw->add_option("--listen", cw_listen, "Bind address[:port]");
    cw->add_option("--fault-mode", cw_fault, "honest|perturb:<eps>|random|lazy");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*kg) return cmd_keygen(kg_m, kg_n, seed, scale_mode, kg_export);
        if (*pv)
            return cmd_pinv(pv_input, lambda, seed, pv_worker, scale_mode, verify_rounds, pv_out,
                            pv_local);
        if (*tr)
            return cmd_train(tr_synth, tr_timg, tr_tlab, tr_eimg, tr_elab, tr_backend, tr_worker,
                             tr_fault, seed, lambda, scale_mode, tr_model_out);
        if (*bs)
            return cmd_bench_scaling(bs_sizes, bs_reps, seed, lambda, scale_mode, verify_rounds,
                                     bs_out);
        if (*vd)
            return cmd_verify_demo(vd_trials, vd_fault, vd_eps, vd_min, vd_max, seed, lambda,
                                   vd_tol, verify_rounds);
        if (*cw) return cmd_cloud_worker(cw_listen, cw_fault);
    } catch (const ResultRejectedError& e) {
        std::cerr << "result rejected: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

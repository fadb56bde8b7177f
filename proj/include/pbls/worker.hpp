#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <string>
#include <unordered_map>

#include "pbls/matrix.hpp"
#include "pbls/protocol.hpp"

namespace pbls {

/// How the (untrusted) worker behaves. Every fault mode keeps the honest
/// output shape, so corruption is only detectable semantically.
struct FaultMode {
    enum class Kind : std::uint8_t { Honest, Perturb, RandomResult, LazyIdentity };
    Kind kind = Kind::Honest;
    double epsilon = 0.0;  // Perturb only

    static FaultMode honest() { return {}; }
    static FaultMode perturb(double eps) { return {Kind::Perturb, eps}; }
    static FaultMode random_result() { return {Kind::RandomResult, 0.0}; }
    static FaultMode lazy_identity() { return {Kind::LazyIdentity, 0.0}; }

    /// Parses "honest", "perturb:<eps>", "random", "lazy".
    static FaultMode parse(const std::string& s);
    std::string to_string() const;
};

/// The cloud side of the protocol: Gram round, then inverse-product round.
/// Holds per-session state (the masked matrix from round one) in an LRU map
/// capped at kMaxSessions.
class CloudWorker {
public:
    explicit CloudWorker(FaultMode fault = FaultMode::honest(), std::uint64_t fault_seed = 1);

    /// A'^T A' (honest), or a corrupted result per the fault mode. Caches A'
    /// for the session.
    DenseMatrix handle_gram(std::uint64_t session_id, const DenseMatrix& a_prime);

    /// R2^-1 A'^T using the session's cached A'. Throws SingularMatrixError
    /// or StateError (no session).
    DenseMatrix handle_invprod(std::uint64_t session_id, const DenseMatrix& r2);

    /// Full frame dispatch: maps exceptions to ERROR frames.
    Frame handle_frame(const Frame& req);

    /// Serves one connection until end-of-stream.
    void serve(Channel& ch);

    const OpCounter& ops() const { return ops_; }
    void reset_ops() { ops_.reset(); }

    static constexpr std::size_t kMaxSessions = 64;

private:
    DenseMatrix corrupt(DenseMatrix honest);
    void cache(std::uint64_t session_id, DenseMatrix a_prime);
    const DenseMatrix* lookup(std::uint64_t session_id);

    FaultMode fault_;
    std::uint64_t rng_state_;
    OpCounter ops_;
    // LRU: most recently used at the front.
    std::list<std::pair<std::uint64_t, DenseMatrix>> sessions_;
    std::unordered_map<std::uint64_t, decltype(sessions_)::iterator> index_;
};

}  // namespace pbls

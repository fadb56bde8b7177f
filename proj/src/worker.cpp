#include "pbls/worker.hpp"

#include <cstdlib>
#include <random>

namespace pbls {

FaultMode FaultMode::parse(const std::string& s) {
    if (s == "honest") return honest();
    if (s == "random") return random_result();
    if (s == "lazy") return lazy_identity();
    if (s.rfind("perturb:", 0) == 0) {
        double eps = std::strtod(s.c_str() + 8, nullptr);
        if (eps == 0.0) throw InvalidArgument("fault mode: perturb needs a nonzero epsilon");
        return perturb(eps);
    }
    throw InvalidArgument("unknown fault mode: " + s);
}

std::string FaultMode::to_string() const {
    switch (kind) {
        case Kind::Honest: return "honest";
        case Kind::Perturb: return "perturb:" + std::to_string(epsilon);
        case Kind::RandomResult: return "random";
        case Kind::LazyIdentity: return "lazy";
    }
    return "?";
}

CloudWorker::CloudWorker(FaultMode fault, std::uint64_t fault_seed)
    : fault_(fault), rng_state_(fault_seed) {}

DenseMatrix CloudWorker::corrupt(DenseMatrix honest) {
    std::mt19937_64 rng(rng_state_);
    rng_state_ = rng();  // advance per corruption
    switch (fault_.kind) {
        case FaultMode::Kind::Honest:
            return honest;
        case FaultMode::Kind::Perturb: {
            std::uniform_int_distribution<std::size_t> pick(0, honest.rows() * honest.cols() - 1);
            honest.data()[pick(rng)] += fault_.epsilon;
            return honest;
        }
        case FaultMode::Kind::RandomResult: {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (double& x : honest.data()) x = u(rng);
            return honest;
        }
        case FaultMode::Kind::LazyIdentity: {
            for (std::size_t i = 0; i < honest.rows(); ++i)
                for (std::size_t j = 0; j < honest.cols(); ++j)
                    honest(i, j) = (i == j) ? 1.0 : 0.0;
            return honest;
        }
    }
    return honest;
}

void CloudWorker::cache(std::uint64_t session_id, DenseMatrix a_prime) {
    if (auto it = index_.find(session_id); it != index_.end()) {
        sessions_.erase(it->second);
        index_.erase(it);
    }
    sessions_.emplace_front(session_id, std::move(a_prime));
    index_[session_id] = sessions_.begin();
    if (sessions_.size() > kMaxSessions) {
        index_.erase(sessions_.back().first);
        sessions_.pop_back();
    }
}

const DenseMatrix* CloudWorker::lookup(std::uint64_t session_id) {
    auto it = index_.find(session_id);
    if (it == index_.end()) return nullptr;
    sessions_.splice(sessions_.begin(), sessions_, it->second);  // touch
    return &sessions_.front().second;
}

DenseMatrix CloudWorker::handle_gram(std::uint64_t session_id, const DenseMatrix& a_prime) {
    if (a_prime.empty()) throw InvalidArgument("handle_gram: empty matrix");
    DenseMatrix gram = mat_mul(a_prime.transpose(), a_prime, &ops_);
    cache(session_id, a_prime);
    return corrupt(std::move(gram));
}

DenseMatrix CloudWorker::handle_invprod(std::uint64_t session_id, const DenseMatrix& r2) {
    const DenseMatrix* a_prime = lookup(session_id);
    if (!a_prime) throw StateError("handle_invprod: no cached matrix for session");
    if (r2.rows() != r2.cols() || r2.rows() != a_prime->cols())
        throw DimensionError("handle_invprod: R2 must be square of size A' cols");
    DenseMatrix r3 = mat_mul(dense_inverse(r2, &ops_), a_prime->transpose(), &ops_);
    return corrupt(std::move(r3));
}

Frame CloudWorker::handle_frame(const Frame& req) {
    Frame resp;
    resp.session_id = req.session_id;
    auto error = [&](WireErrorCode code, const std::string& msg) {
        resp.opcode = Opcode::Error;
        resp.payload = encode_error_payload(code, msg);
        return resp;
    };
    try {
        switch (req.opcode) {
            case Opcode::GramReq: {
                DenseMatrix a_prime = DenseMatrix::deserialize(req.payload);
                resp.opcode = Opcode::GramResp;
                resp.payload = handle_gram(req.session_id, a_prime).serialize();
                return resp;
            }
            case Opcode::InvprodReq: {
                DenseMatrix r2 = DenseMatrix::deserialize(req.payload);
                resp.opcode = Opcode::InvprodResp;
                resp.payload = handle_invprod(req.session_id, r2).serialize();
                return resp;
            }
            default:
                return error(WireErrorCode::Malformed, "unexpected opcode");
        }
    } catch (const SingularMatrixError& e) {
        return error(WireErrorCode::Singular, e.what());
    } catch (const StateError& e) {
        return error(WireErrorCode::NoSession, e.what());
    } catch (const FormatError& e) {
        return error(WireErrorCode::Malformed, e.what());
    } catch (const DimensionError& e) {
        return error(WireErrorCode::Malformed, e.what());
    } catch (const std::exception& e) {
        return error(WireErrorCode::Internal, e.what());
    }
}

void CloudWorker::serve(Channel& ch) {
    Frame req;
    while (read_frame(ch, req)) write_frame(ch, handle_frame(req));
}

}  // namespace pbls

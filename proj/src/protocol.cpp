#include "pbls/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <mutex>

namespace pbls {

namespace {

constexpr char kMagic[4] = {'P', 'B', 'L', 'S'};

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

bool opcode_valid(std::uint8_t raw) {
    switch (static_cast<Opcode>(raw)) {
        case Opcode::GramReq:
        case Opcode::GramResp:
        case Opcode::InvprodReq:
        case Opcode::InvprodResp:
        case Opcode::Error:
            return true;
    }
    return false;
}

std::vector<std::uint8_t> encode_frame(const Frame& f) {
    if (!opcode_valid(static_cast<std::uint8_t>(f.opcode)))
        throw ProtocolError(ProtocolErrorKind::UnknownOpcode, "encode: invalid opcode");
    if (f.payload.size() > kMaxPayload)
        throw ProtocolError(ProtocolErrorKind::Oversize, "encode: payload exceeds 2^32 bytes");
    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderSize + f.payload.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kProtocolVersion);
    out.push_back(static_cast<std::uint8_t>(f.opcode));
    put_u64_le(out, f.session_id);
    put_u64_le(out, f.payload.size());
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameHeaderSize)
        throw ProtocolError(ProtocolErrorKind::Truncated, "decode: truncated header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ProtocolError(ProtocolErrorKind::BadMagic, "decode: bad magic");
    if (bytes[4] != kProtocolVersion)
        throw ProtocolError(ProtocolErrorKind::UnsupportedVersion,
                            "decode: unsupported version " + std::to_string(bytes[4]));
    if (!opcode_valid(bytes[5]))
        throw ProtocolError(ProtocolErrorKind::UnknownOpcode,
                            "decode: unknown opcode " + std::to_string(bytes[5]));
    std::uint64_t payload_len = get_u64_le(bytes.data() + 14);
    if (payload_len > kMaxPayload)
        throw ProtocolError(ProtocolErrorKind::Oversize, "decode: oversize payload");
    if (bytes.size() != kFrameHeaderSize + payload_len)
        throw ProtocolError(ProtocolErrorKind::Truncated, "decode: body length mismatch");
    Frame f;
    f.opcode = static_cast<Opcode>(bytes[5]);
    f.session_id = get_u64_le(bytes.data() + 6);
    f.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.end());
    return f;
}

std::vector<std::uint8_t> encode_error_payload(WireErrorCode code, const std::string& message) {
    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(code) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint16_t>(code) >> 8));
    out.insert(out.end(), message.begin(), message.end());
    return out;
}

std::pair<WireErrorCode, std::string> decode_error_payload(std::span<const std::uint8_t> payload) {
    if (payload.size() < 2)
        throw ProtocolError(ProtocolErrorKind::Truncated, "error payload too short");
    std::uint16_t code = static_cast<std::uint16_t>(payload[0]) |
                         (static_cast<std::uint16_t>(payload[1]) << 8);
    return {static_cast<WireErrorCode>(code),
            std::string(payload.begin() + 2, payload.end())};
}

namespace {

// Returns false only on EOF before the first byte.
bool read_exact(Channel& ch, std::uint8_t* buf, std::size_t n, bool eof_ok_at_start) {
    std::size_t got = 0;
    while (got < n) {
        std::size_t r = ch.read(buf + got, n - got);
        if (r == 0) {
            if (got == 0 && eof_ok_at_start) return false;
            throw ProtocolError(ProtocolErrorKind::Truncated, "stream truncated mid-frame");
        }
        got += r;
    }
    return true;
}

}  // namespace

bool read_frame(Channel& ch, Frame& out) {
    std::uint8_t header[kFrameHeaderSize];
    if (!read_exact(ch, header, kFrameHeaderSize, /*eof_ok_at_start=*/true)) return false;
    if (std::memcmp(header, kMagic, 4) != 0)
        throw ProtocolError(ProtocolErrorKind::BadMagic, "read_frame: bad magic");
    if (header[4] != kProtocolVersion)
        throw ProtocolError(ProtocolErrorKind::UnsupportedVersion, "read_frame: unsupported version");
    if (!opcode_valid(header[5]))
        throw ProtocolError(ProtocolErrorKind::UnknownOpcode, "read_frame: unknown opcode");
    std::uint64_t payload_len = get_u64_le(header + 14);
    if (payload_len > kMaxPayload)
        throw ProtocolError(ProtocolErrorKind::Oversize, "read_frame: oversize payload");
    out.opcode = static_cast<Opcode>(header[5]);
    out.session_id = get_u64_le(header + 6);
    out.payload.resize(payload_len);
    if (payload_len > 0) read_exact(ch, out.payload.data(), payload_len, false);
    return true;
}

void write_frame(Channel& ch, const Frame& f) {
    ch.write(encode_frame(f));
}

// ---------------------------------------------------------------------------
// In-process pipe
// ---------------------------------------------------------------------------

namespace {

struct PipeState {
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::uint8_t> a_to_b, b_to_a;
    bool a_closed = false, b_closed = false;
};

class PipeEnd : public Channel {
public:
    PipeEnd(std::shared_ptr<PipeState> st, bool is_a) : st_(std::move(st)), is_a_(is_a) {}
    ~PipeEnd() override { close(); }

    std::size_t read(std::uint8_t* buf, std::size_t n) override {
        std::unique_lock lock(st_->m);
        auto& q = is_a_ ? st_->b_to_a : st_->a_to_b;
        bool& peer_closed = is_a_ ? st_->b_closed : st_->a_closed;
        st_->cv.wait(lock, [&] { return !q.empty() || peer_closed; });
        if (q.empty()) return 0;  // peer closed, drained
        std::size_t take = std::min(n, q.size());
        for (std::size_t i = 0; i < take; ++i) {
            buf[i] = q.front();
            q.pop_front();
        }
        return take;
    }

    void write(std::span<const std::uint8_t> data) override {
        std::lock_guard lock(st_->m);
        bool& self_closed = is_a_ ? st_->a_closed : st_->b_closed;
        if (self_closed)
            throw ProtocolError(ProtocolErrorKind::Transport, "pipe: write after close");
        auto& q = is_a_ ? st_->a_to_b : st_->b_to_a;
        q.insert(q.end(), data.begin(), data.end());
        st_->cv.notify_all();
    }

    void close() override {
        std::lock_guard lock(st_->m);
        (is_a_ ? st_->a_closed : st_->b_closed) = true;
        st_->cv.notify_all();
    }

private:
    std::shared_ptr<PipeState> st_;
    bool is_a_;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_pipe() {
    auto st = std::make_shared<PipeState>();
    return {std::make_unique<PipeEnd>(st, true), std::make_unique<PipeEnd>(st, false)};
}

// ---------------------------------------------------------------------------
// TCP transport
// ---------------------------------------------------------------------------

namespace {

class TcpChannel : public Channel {
public:
    explicit TcpChannel(int fd) : fd_(fd) {}
    ~TcpChannel() override { close(); }

    std::size_t read(std::uint8_t* buf, std::size_t n) override {
        ssize_t r = ::recv(fd_, buf, n, 0);
        if (r < 0) throw ProtocolError(ProtocolErrorKind::Transport, "recv failed");
        return static_cast<std::size_t>(r);
    }

    void write(std::span<const std::uint8_t> data) override {
        std::size_t sent = 0;
        while (sent < data.size()) {
            ssize_t r = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (r <= 0) throw ProtocolError(ProtocolErrorKind::Transport, "send failed");
            sent += static_cast<std::size_t>(r);
        }
    }

    void close() override {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_;
};

}  // namespace

std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
        throw ProtocolError(ProtocolErrorKind::Transport, "cannot resolve " + host);
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0)
        throw ProtocolError(ProtocolErrorKind::Transport,
                            "cannot connect to " + host + ":" + std::to_string(port));
    return std::make_unique<TcpChannel>(fd);
}

TcpListener::TcpListener(const std::string& bind_addr, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError(ProtocolErrorKind::Transport, "socket failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (bind_addr.empty() || bind_addr == "0.0.0.0")
        addr.sin_addr.s_addr = INADDR_ANY;
    else if (inet_pton(AF_INET, bind_addr.c_str(), &addr.sin_addr) != 1)
        throw ProtocolError(ProtocolErrorKind::Transport, "bad bind address " + bind_addr);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw ProtocolError(ProtocolErrorKind::Transport,
                            "bind failed on port " + std::to_string(port));
    if (::listen(fd_, 16) != 0)
        throw ProtocolError(ProtocolErrorKind::Transport, "listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { stop(); }

std::unique_ptr<Channel> TcpListener::accept() {
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw ProtocolError(ProtocolErrorKind::Transport, "accept failed");
    return std::make_unique<TcpChannel>(cfd);
}

void TcpListener::stop() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

std::uint16_t default_port() {
    if (const char* env = std::getenv("PBLS_PORT")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0 && v < 65536) return static_cast<std::uint16_t>(v);
    }
    return 7541;
}

}  // namespace pbls

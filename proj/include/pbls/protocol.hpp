#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pbls/errors.hpp"

namespace pbls {

// Wire frame: "PBLS" | version u8 | opcode u8 | session_id u64 LE |
// payload_len u64 LE | payload. Header is 22 bytes; this layout is the
// normative contract, bit-exact.
constexpr std::size_t kFrameHeaderSize = 22;
constexpr std::uint8_t kProtocolVersion = 1;
constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 32;

enum class Opcode : std::uint8_t {
    GramReq = 0x01,
    GramResp = 0x81,
    InvprodReq = 0x02,
    InvprodResp = 0x82,
    Error = 0xFF,
};

bool opcode_valid(std::uint8_t raw);

// Error-frame payload: u16 LE code, then a UTF-8 message.
enum class WireErrorCode : std::uint16_t {
    Malformed = 1,
    Singular = 2,
    NoSession = 3,
    Internal = 4,
};

struct Frame {
    Opcode opcode = Opcode::Error;
    std::uint64_t session_id = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const Frame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const Frame& f);
Frame decode_frame(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_error_payload(WireErrorCode code, const std::string& message);
std::pair<WireErrorCode, std::string> decode_error_payload(std::span<const std::uint8_t> payload);

/// Blocking byte channel. read() may return fewer bytes than requested;
/// 0 means end of stream.
class Channel {
public:
    virtual ~Channel() = default;
    virtual std::size_t read(std::uint8_t* buf, std::size_t n) = 0;
    virtual void write(std::span<const std::uint8_t> data) = 0;
    virtual void close() = 0;
};

/// Reads one frame from a channel. Returns false on a clean end-of-stream at
/// a frame boundary; throws ProtocolError on anything malformed or truncated
/// mid-frame.
bool read_frame(Channel& ch, Frame& out);
void write_frame(Channel& ch, const Frame& f);

/// In-process duplex pipe: make_pipe() returns the two endpoints.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_pipe();

/// TCP transport. Throws ProtocolError(Transport) on socket failures.
std::unique_ptr<Channel> tcp_connect(const std::string& host, std::uint16_t port);

class TcpListener {
public:
    TcpListener(const std::string& bind_addr, std::uint16_t port);
    ~TcpListener();
    std::unique_ptr<Channel> accept();
    std::uint16_t port() const { return port_; }
    void stop();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Default port; overridden by the PBLS_PORT environment variable.
std::uint16_t default_port();

}  // namespace pbls

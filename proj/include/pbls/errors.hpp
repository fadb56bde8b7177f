#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pbls {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    using Error::Error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

struct StateError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

// Wire-level failures, tagged with a coarse category so tests and callers
// can distinguish malformed input from transport truncation.
enum class ProtocolErrorKind : std::uint8_t {
    BadMagic,
    UnsupportedVersion,
    UnknownOpcode,
    Truncated,
    Oversize,
    RemoteError,
    Transport,
};

struct ProtocolError : Error {
    ProtocolError(ProtocolErrorKind k, const std::string& msg) : Error(msg), kind(k) {}
    ProtocolErrorKind kind;
};

}  // namespace pbls

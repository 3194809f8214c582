#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protosel {

/// Coarse failure category, used by the CLI to emit a machine-readable code.
enum class ErrorKind {
    InvalidArgument,
    Parse,
    Io,
    OutOfRange,
    Degenerate,
    Resource,
    Stale,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::OutOfRange: return "out_of_range";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Resource: return "resource";
    case ErrorKind::Stale: return "stale";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) fail(kind, what);
}

} // namespace protosel

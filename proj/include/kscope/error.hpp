#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kscope {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    Parse,
    OutsideWindow,
    DuplicatePoint,
    Io,
    GuardViolation,
    UnsupportedAlpha,
    UnsupportedModel,
    MissingPlusSampling,
    WindowMismatch,
    OutOfRange,
    Config,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every recoverable failure in the library.
/// The code lets frontends map failures onto exit codes without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

}  // namespace kscope

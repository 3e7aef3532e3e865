#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace exclaim {

enum class ErrorKind {
    MalformedRecord,
    DuplicateId,
    PreconditionFailed,
    InvalidConfig,
    Io,
    ProviderUnavailable,
    ProviderExhausted,
    ImageUnreadable,
    MalformedScore,
    DimMismatch,
    CorruptIndex,
    ScriptMissing,
    UnverifiedEvidence,
    UnparseableVerdict,
    EmptyInput,
    MissingCategory,
    NotAPermutation,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure surfaced by the engine carries a kind so callers (CLI, service)
// can map it to exit codes or HTTP statuses without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind),
          detail_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace exclaim

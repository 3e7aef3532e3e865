#include "exclaim/error.hpp"

namespace exclaim {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MalformedRecord: return "MalformedRecord";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::PreconditionFailed: return "PreconditionFailed";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::Io: return "Io";
        case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorKind::ProviderExhausted: return "ProviderExhausted";
        case ErrorKind::ImageUnreadable: return "ImageUnreadable";
        case ErrorKind::MalformedScore: return "MalformedScore";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::CorruptIndex: return "CorruptIndex";
        case ErrorKind::ScriptMissing: return "ScriptMissing";
        case ErrorKind::UnverifiedEvidence: return "UnverifiedEvidence";
        case ErrorKind::UnparseableVerdict: return "UnparseableVerdict";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::MissingCategory: return "MissingCategory";
        case ErrorKind::NotAPermutation: return "NotAPermutation";
    }
    return "Unknown";
}

}  // namespace exclaim

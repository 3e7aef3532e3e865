#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "exclaim/alignment.hpp"
#include "exclaim/http.hpp"

namespace exclaim::embedding {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    double norm() const noexcept;
    // Throws PreconditionFailed on empty or non-finite vectors.
    void validate() const;
    bool operator==(const EmbeddingVector&) const = default;
};

enum class EncoderKind { Visual, Text };

// Reproducible stand-in for a neural encoder.
//
// For block b = 0, 1, 2, ... the mock computes
//     SHA-256("exclaim-mock-v1" || le64(seed) || le32(b) || input)
// and reads the 32-byte digest as four little-endian u64 words. Each word u
// maps to 2 * ((u >> 11) * 2^-53) - 1, a value in [-1, 1). The first `dim`
// values are then divided by their Euclidean norm.
struct DeterministicMock {
    std::uint64_t seed = 0;
    bool operator==(const DeterministicMock&) const = default;
};

using EncoderProvider = std::variant<DeterministicMock, RemoteService>;

struct EncoderProfile {
    EncoderKind kind = EncoderKind::Text;
    EncoderProvider provider = DeterministicMock{};
    std::size_t dim = 64;

    void validate() const;
};

EmbeddingVector mock_embed(std::string_view input, std::uint64_t seed, std::size_t dim);

// "class=<label>|crop=<sha256 of crop handle>"
std::string visual_canonical(const VisualEntity& v);
// "surface=<text>|ner=<label>"
std::string textual_canonical(const TextualEntity& t);

// Encodes a canonical string (or, for remote visual encoders, the crop bytes
// when the handle is readable) with the given profile.
EmbeddingVector encode(const EncoderProfile& profile, const std::string& canonical,
                       const std::string& bytes_ref, HttpClient* client);

// (Z_V, Z_T) for one aligned entity. Throws DimMismatch when a provider
// returns a vector of the wrong size, PreconditionFailed when profile kinds
// are swapped.
std::pair<EmbeddingVector, EmbeddingVector> encode_entity(const alignment::AlignedEntity& e,
                                                          const EncoderProfile& visual,
                                                          const EncoderProfile& textual,
                                                          HttpClient* client = nullptr);

// Z_event for a whole caption; the caption itself is the canonical string.
EmbeddingVector encode_event(const std::string& caption, const EncoderProfile& textual,
                             HttpClient* client = nullptr);

}  // namespace exclaim::embedding

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exclaim/embedding.hpp"

namespace exclaim::index {

enum class Granularity : std::uint8_t { Visual = 0, Textual = 1, Event = 2 };

std::string_view to_string(Granularity g) noexcept;
std::optional<Granularity> parse_granularity(std::string_view text);

// Vectors are held as 32-bit floats, the same precision the on-disk format
// uses, so a saved index reloads bit-for-bit.
struct IndexRecord {
    std::string record_id;
    std::string source_news_id;
    std::string payload;
    std::vector<float> vector;

    bool operator==(const IndexRecord&) const = default;
};

IndexRecord make_record(std::string record_id, std::string source_news_id, std::string payload,
                        const embedding::EmbeddingVector& v);

struct Hit {
    std::string record_id;
    std::string source_news_id;
    std::string payload;
    double distance = 0.0;

    bool operator==(const Hit&) const = default;
};

// Immutable exact (flat) Euclidean index for one granularity.
class VectorIndex {
public:
    VectorIndex() = default;

    Granularity granularity() const noexcept { return granularity_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::span<const IndexRecord> records() const noexcept { return records_; }

    // Up to k hits by ascending Euclidean distance (computed in double over
    // the stored components); equal distances keep insertion order.
    std::vector<Hit> knn(std::span<const double> query, std::size_t k) const;
    std::vector<Hit> knn(const embedding::EmbeddingVector& query, std::size_t k) const {
        return knn(std::span<const double>(query.values), k);
    }

    bool operator==(const VectorIndex&) const = default;

    friend VectorIndex build_index(Granularity, std::size_t, std::vector<IndexRecord>);

private:
    Granularity granularity_ = Granularity::Event;
    std::size_t dim_ = 0;
    std::vector<IndexRecord> records_;
};

// Throws DimMismatch when a record's vector length differs from `dim`, and
// PreconditionFailed for dim == 0.
VectorIndex build_index(Granularity granularity, std::size_t dim, std::vector<IndexRecord> records);

// Binary format, little-endian:
//   "EXGIDX1\0" | u8 granularity | u32 dim | u64 count |
//   per record: u16 len + id | u16 len + source id | u32 len + payload | dim x f32
std::uint64_t write_index(std::ostream& out, const VectorIndex& index);
VectorIndex read_index(std::istream& in);

// save returns the number of bytes written; load throws CorruptIndex on a bad
// magic, truncation, or trailing bytes.
std::uint64_t save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

}  // namespace exclaim::index

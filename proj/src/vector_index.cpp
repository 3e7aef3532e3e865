#include "exclaim/vector_index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "exclaim/error.hpp"

namespace exclaim::index {

std::string_view to_string(Granularity g) noexcept {
    switch (g) {
        case Granularity::Visual: return "visual";
        case Granularity::Textual: return "textual";
        case Granularity::Event: return "event";
    }
    return "";
}

std::optional<Granularity> parse_granularity(std::string_view text) {
    for (auto g : {Granularity::Visual, Granularity::Textual, Granularity::Event}) {
        if (to_string(g) == text) return g;
    }
    return std::nullopt;
}

IndexRecord make_record(std::string record_id, std::string source_news_id, std::string payload,
                        const embedding::EmbeddingVector& v) {
    IndexRecord r{std::move(record_id), std::move(source_news_id), std::move(payload), {}};
    r.vector.reserve(v.dim());
    for (double x : v.values) r.vector.push_back(static_cast<float>(x));
    return r;
}

VectorIndex build_index(Granularity granularity, std::size_t dim, std::vector<IndexRecord> records) {
    if (dim == 0) fail(ErrorKind::PreconditionFailed, "index dim must be positive");
    for (const auto& r : records) {
        if (r.vector.size() != dim) {
            fail(ErrorKind::DimMismatch, "record '" + r.record_id + "' has dim " +
                                             std::to_string(r.vector.size()) + ", index dim is " +
                                             std::to_string(dim));
        }
    }
    VectorIndex index;
    index.granularity_ = granularity;
    index.dim_ = dim;
    index.records_ = std::move(records);
    return index;
}

std::vector<Hit> VectorIndex::knn(std::span<const double> query, std::size_t k) const {
    if (k == 0) fail(ErrorKind::PreconditionFailed, "k must be positive");
    if (query.size() != dim_) {
        fail(ErrorKind::DimMismatch, "query dim " + std::to_string(query.size()) + " vs index dim " +
                                         std::to_string(dim_));
    }
    std::vector<std::pair<double, std::size_t>> scored(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& v = records_[i].vector;
        double sum = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const double diff = query[d] - static_cast<double>(v[d]);
            sum += diff * diff;
        }
        scored[i] = {std::sqrt(sum), i};
    }
    const auto take = std::min(k, scored.size());
    // (distance, position) ordering realizes the insertion-order tie-break.
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end());

    std::vector<Hit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto& r = records_[scored[i].second];
        hits.push_back({r.record_id, r.source_news_id, r.payload, scored[i].first});
    }
    return hits;
}

namespace {

constexpr std::array<char, 8> k_magic = {'E', 'X', 'G', 'I', 'D', 'X', '1', '\0'};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <typename T>
    void uint(T value) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
        }
    }
    void bytes(std::string_view s) {
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
        written_ += s.size();
    }
    void f32(float value) { uint(std::bit_cast<std::uint32_t>(value)); }
    std::uint64_t written() const { return written_; }

private:
    void put(char c) {
        out_.put(c);
        ++written_;
    }
    std::ostream& out_;
    std::uint64_t written_ = 0;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T uint(const char* what) {
        std::array<unsigned char, sizeof(T)> buf{};
        read(reinterpret_cast<char*>(buf.data()), buf.size(), what);
        std::uint64_t v = 0;
        for (std::size_t i = sizeof(T); i-- > 0;) v = (v << 8) | buf[i];
        return static_cast<T>(v);
    }
    std::string bytes(std::size_t n, const char* what) {
        std::string s(n, '\0');
        read(s.data(), n, what);
        return s;
    }
    float f32(const char* what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }

private:
    void read(char* dst, std::size_t n, const char* what) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            fail(ErrorKind::CorruptIndex, std::string("truncated while reading ") + what);
        }
    }
    std::istream& in_;
};

void check_len(std::size_t len, std::size_t limit, const std::string& what) {
    if (len > limit) fail(ErrorKind::PreconditionFailed, what + " too long for the index format");
}

}  // namespace

std::uint64_t write_index(std::ostream& out, const VectorIndex& index) {
    Writer w(out);
    w.bytes(std::string_view(k_magic.data(), k_magic.size()));
    w.uint(static_cast<std::uint8_t>(index.granularity()));
    check_len(index.dim(), std::numeric_limits<std::uint32_t>::max(), "dim");
    w.uint(static_cast<std::uint32_t>(index.dim()));
    w.uint(static_cast<std::uint64_t>(index.size()));
    for (const auto& r : index.records()) {
        check_len(r.record_id.size(), 0xffff, "record id");
        check_len(r.source_news_id.size(), 0xffff, "source id");
        check_len(r.payload.size(), 0xffffffffu, "payload");
        w.uint(static_cast<std::uint16_t>(r.record_id.size()));
        w.bytes(r.record_id);
        w.uint(static_cast<std::uint16_t>(r.source_news_id.size()));
        w.bytes(r.source_news_id);
        w.uint(static_cast<std::uint32_t>(r.payload.size()));
        w.bytes(r.payload);
        for (float x : r.vector) w.f32(x);
    }
    if (!out) fail(ErrorKind::Io, "failed writing index");
    return w.written();
}

VectorIndex read_index(std::istream& in) {
    Reader r(in);
    const auto magic = r.bytes(k_magic.size(), "magic");
    if (!std::equal(magic.begin(), magic.end(), k_magic.begin())) {
        fail(ErrorKind::CorruptIndex, "bad magic");
    }
    const auto g = r.uint<std::uint8_t>("granularity");
    if (g > 2) fail(ErrorKind::CorruptIndex, "unknown granularity " + std::to_string(g));
    const auto dim = r.uint<std::uint32_t>("dim");
    const auto count = r.uint<std::uint64_t>("count");
    if (dim == 0) fail(ErrorKind::CorruptIndex, "zero dim");

    std::vector<IndexRecord> records;
    records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t i = 0; i < count; ++i) {
        IndexRecord rec;
        rec.record_id = r.bytes(r.uint<std::uint16_t>("id length"), "id");
        rec.source_news_id = r.bytes(r.uint<std::uint16_t>("source length"), "source id");
        rec.payload = r.bytes(r.uint<std::uint32_t>("payload length"), "payload");
        rec.vector.resize(dim);
        for (auto& x : rec.vector) x = r.f32("vector");
        records.push_back(std::move(rec));
    }
    return build_index(static_cast<Granularity>(g), dim, std::move(records));
}

std::uint64_t save_index(const VectorIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    const auto n = write_index(out, index);
    out.flush();
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
    return n;
}

VectorIndex load_index(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    auto index = read_index(in);
    if (in.peek() != std::char_traits<char>::eof()) {
        fail(ErrorKind::CorruptIndex, "trailing bytes after last record in " + path.string());
    }
    return index;
}

}  // namespace exclaim::index

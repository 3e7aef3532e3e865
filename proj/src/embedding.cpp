#include "exclaim/embedding.hpp"

#include <cmath>
#include <cstring>

#include "exclaim/corpus.hpp"
#include "exclaim/digest.hpp"
#include "exclaim/error.hpp"

namespace exclaim::embedding {

double EmbeddingVector::norm() const noexcept {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

void EmbeddingVector::validate() const {
    if (values.empty()) fail(ErrorKind::PreconditionFailed, "embedding has zero dimensions");
    for (double v : values) {
        if (!std::isfinite(v)) fail(ErrorKind::PreconditionFailed, "embedding has a non-finite component");
    }
}

void EncoderProfile::validate() const {
    if (dim == 0) fail(ErrorKind::InvalidConfig, "encoder dim must be positive");
    if (const auto* r = std::get_if<RemoteService>(&provider); r && r->endpoint.empty()) {
        fail(ErrorKind::InvalidConfig, "remote encoder needs an endpoint");
    }
}

namespace {

void append_le(std::string& buf, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) buf.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

std::uint64_t read_le64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

EmbeddingVector mock_embed(std::string_view input, std::uint64_t seed, std::size_t dim) {
    if (dim == 0) fail(ErrorKind::PreconditionFailed, "mock dim must be positive");
    EmbeddingVector out;
    out.values.reserve(dim);
    std::string block;
    for (std::uint32_t b = 0; out.values.size() < dim; ++b) {
        block.assign("exclaim-mock-v1");
        append_le(block, seed, 8);
        append_le(block, b, 4);
        block.append(input);
        const auto digest = sha256(block);
        for (std::size_t w = 0; w < 4 && out.values.size() < dim; ++w) {
            const std::uint64_t u = read_le64(digest.data() + 8 * w);
            const double unit = static_cast<double>(u >> 11) * 0x1.0p-53;
            out.values.push_back(2.0 * unit - 1.0);
        }
    }
    const double n = out.norm();
    for (double& v : out.values) v /= n;
    return out;
}

std::string visual_canonical(const VisualEntity& v) {
    return "class=" + v.class_label + "|crop=" + sha256_hex(v.crop_ref);
}

std::string textual_canonical(const TextualEntity& t) {
    return "surface=" + t.surface + "|ner=" + t.ner_label;
}

EmbeddingVector encode(const EncoderProfile& profile, const std::string& canonical,
                       const std::string& bytes_ref, HttpClient* client) {
    profile.validate();
    EmbeddingVector out;
    if (const auto* mock = std::get_if<DeterministicMock>(&profile.provider)) {
        out = mock_embed(canonical, mock->seed, profile.dim);
    } else {
        const auto& remote = std::get<RemoteService>(profile.provider);
        if (client == nullptr) fail(ErrorKind::ProviderUnavailable, "no HTTP client for " + remote.endpoint);
        nlohmann::json request = {{"kind", profile.kind == EncoderKind::Visual ? "visual" : "text"},
                                  {"text", canonical},
                                  {"dim", profile.dim}};
        std::string bytes;
        if (!bytes_ref.empty() && read_file(bytes_ref, bytes)) request["bytes_b64"] = base64_encode(bytes);
        const auto reply = post_json(*client, remote.endpoint, request);
        if (!reply.contains("vector") || !reply.at("vector").is_array()) {
            fail(ErrorKind::ProviderUnavailable, remote.endpoint + " reply lacks a 'vector' list");
        }
        try {
            out.values = reply.at("vector").get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::ProviderUnavailable, remote.endpoint + " returned non-numeric components");
        }
    }
    if (out.dim() != profile.dim) {
        fail(ErrorKind::DimMismatch, "encoder returned dim " + std::to_string(out.dim()) + ", expected " +
                                         std::to_string(profile.dim));
    }
    out.validate();
    return out;
}

std::pair<EmbeddingVector, EmbeddingVector> encode_entity(const alignment::AlignedEntity& e,
                                                          const EncoderProfile& visual,
                                                          const EncoderProfile& textual,
                                                          HttpClient* client) {
    if (visual.kind != EncoderKind::Visual || textual.kind != EncoderKind::Text) {
        fail(ErrorKind::PreconditionFailed, "encoder profile kinds do not match their roles");
    }
    return {encode(visual, visual_canonical(e.pair.visual), e.pair.visual.crop_ref, client),
            encode(textual, textual_canonical(e.pair.textual), {}, client)};
}

EmbeddingVector encode_event(const std::string& caption, const EncoderProfile& textual, HttpClient* client) {
    if (corpus::trim(caption).empty()) fail(ErrorKind::PreconditionFailed, "cannot encode an empty caption");
    if (textual.kind != EncoderKind::Text) {
        fail(ErrorKind::PreconditionFailed, "event encoding requires a text encoder profile");
    }
    return encode(textual, caption, {}, client);
}

}  // namespace exclaim::embedding

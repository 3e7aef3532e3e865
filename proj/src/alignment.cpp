#include "exclaim/alignment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "exclaim/digest.hpp"
#include "exclaim/error.hpp"

namespace exclaim::alignment {

void AlignmentConfig::validate() const {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        fail(ErrorKind::InvalidConfig, "alignment threshold must lie in [0,1]");
    }
    if (const auto* r = std::get_if<RemoteService>(&scorer); r && r->endpoint.empty()) {
        fail(ErrorKind::InvalidConfig, "remote alignment scorer needs an endpoint");
    }
}

AlignmentScore::AlignmentScore(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
        fail(ErrorKind::MalformedScore, "alignment score " + std::to_string(value) + " outside [0,1]");
    }
}

std::set<std::string> lowercase_tokens(std::string_view text) {
    std::set<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.insert(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.insert(std::move(current));
    return tokens;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t shared = 0;
    for (const auto& t : a) shared += b.count(t);
    return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

AlignmentScore score_alignment(const extraction::EntityPairCandidate& pair, const AlignmentConfig& cfg,
                               HttpClient* client) {
    if (std::holds_alternative<LexicalOverlap>(cfg.scorer)) {
        return AlignmentScore(jaccard(lowercase_tokens(pair.visual.class_label),
                                      lowercase_tokens(pair.textual.surface)));
    }
    const auto& remote = std::get<RemoteService>(cfg.scorer);
    if (client == nullptr) fail(ErrorKind::ProviderUnavailable, "no HTTP client for " + remote.endpoint);

    nlohmann::json request = {{"class_label", pair.visual.class_label},
                              {"crop_ref", pair.visual.crop_ref},
                              {"surface", pair.textual.surface}};
    std::string crop;
    if (!pair.visual.crop_ref.empty() && read_file(pair.visual.crop_ref, crop)) {
        request["crop_b64"] = base64_encode(crop);
    }
    const auto reply = post_json(*client, remote.endpoint, request);
    if (!reply.contains("score") || !reply.at("score").is_number()) {
        fail(ErrorKind::MalformedScore, remote.endpoint + " reply lacks a numeric 'score'");
    }
    return AlignmentScore(reply.at("score").get<double>());
}

std::vector<AlignedEntity> gate(std::span<const extraction::EntityPairCandidate> candidates,
                                const AlignmentConfig& cfg, const std::string& source_news_id,
                                HttpClient* client) {
    cfg.validate();
    std::vector<AlignedEntity> kept;
    for (const auto& candidate : candidates) {
        const auto score = score_alignment(candidate, cfg, client);
        if (score.value() >= cfg.threshold) kept.push_back({candidate, score, source_news_id});
    }
    return kept;
}

std::vector<AlignedEntity> gate(std::span<const AlignedEntity> scored, double threshold) {
    std::vector<AlignedEntity> kept;
    std::copy_if(scored.begin(), scored.end(), std::back_inserter(kept),
                 [&](const AlignedEntity& e) { return e.score.value() >= threshold; });
    return kept;
}

}  // namespace exclaim::alignment

#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "exclaim/extraction.hpp"
#include "exclaim/http.hpp"

namespace exclaim::alignment {

// Jaccard similarity of lowercase token sets of the visual class label and the
// textual surface.
struct LexicalOverlap {
    bool operator==(const LexicalOverlap&) const = default;
};

using Scorer = std::variant<LexicalOverlap, RemoteService>;

struct AlignmentConfig {
    Scorer scorer = LexicalOverlap{};
    double threshold = 0.5;  // tau; the gate keeps score >= threshold

    void validate() const;
};

// S(v, t), always within [0, 1].
class AlignmentScore {
public:
    // Throws MalformedScore outside [0, 1] or for NaN.
    explicit AlignmentScore(double value);
    double value() const noexcept { return value_; }
    bool operator==(const AlignmentScore&) const = default;

private:
    double value_;
};

struct AlignedEntity {
    extraction::EntityPairCandidate pair;
    AlignmentScore score;
    std::string source_news_id;
    bool operator==(const AlignedEntity&) const = default;
};

std::set<std::string> lowercase_tokens(std::string_view text);
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

AlignmentScore score_alignment(const extraction::EntityPairCandidate& pair, const AlignmentConfig& cfg,
                               HttpClient* client = nullptr);

// Scores each candidate and keeps those with score >= threshold, in order.
std::vector<AlignedEntity> gate(std::span<const extraction::EntityPairCandidate> candidates,
                                const AlignmentConfig& cfg, const std::string& source_news_id,
                                HttpClient* client = nullptr);

// Re-applies the threshold to already-scored entities.
std::vector<AlignedEntity> gate(std::span<const AlignedEntity> scored, double threshold);

}  // namespace exclaim::alignment

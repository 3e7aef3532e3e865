#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "exclaim/corpus.hpp"
#include "exclaim/entities.hpp"
#include "exclaim/http.hpp"

namespace exclaim::extraction {

// Reads the item's pre_extracted sidecar.
struct Sidecar {
    bool operator==(const Sidecar&) const = default;
};

// Capitalized-token-run heuristic standing in for an NER service.
struct RuleBased {
    bool operator==(const RuleBased&) const = default;
};

using VisualProvider = std::variant<Sidecar, RemoteService>;
using TextualProvider = std::variant<Sidecar, RuleBased, RemoteService>;

struct ExtractorConfig {
    VisualProvider visual_provider = Sidecar{};
    TextualProvider textual_provider = RuleBased{};
    double min_confidence = 0.0;

    void validate() const;
};

struct EntityPairCandidate {
    VisualEntity visual;
    TextualEntity textual;
    bool operator==(const EntityPairCandidate&) const = default;
};

// Visual entities for the item, invalid boxes and out-of-range confidences
// dropped, then filtered by min_confidence. A present sidecar always wins over
// a remote provider. `client` is required only for RemoteService.
std::vector<VisualEntity> extract_visual(const corpus::NewsItem& item, const ExtractorConfig& cfg,
                                         HttpClient* client = nullptr);

// Textual entities with spans validated against the caption and overlaps
// resolved. Throws PreconditionFailed on an empty caption.
std::vector<TextualEntity> extract_textual(const corpus::NewsItem& item, const ExtractorConfig& cfg,
                                           HttpClient* client = nullptr);

// Maximal runs of capitalized tokens. A run made of a single sentence-initial
// token is dropped since its capitalization carries no signal; longer runs that
// start a sentence are kept. Trailing punctuation ends a run and is not part of
// the span.
std::vector<TextualEntity> rule_based_entities(const std::string& caption);

// Keeps the longer span on overlap, then the earlier start. Output is sorted by
// start offset.
std::vector<TextualEntity> resolve_overlaps(std::vector<TextualEntity> entities);

// Cartesian product in (visual order, textual order).
std::vector<EntityPairCandidate> pair_candidates(std::span<const VisualEntity> visuals,
                                                 std::span<const TextualEntity> textuals);

}  // namespace exclaim::extraction

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exclaim/alignment.hpp"
#include "exclaim/corpus.hpp"
#include "exclaim/embedding.hpp"
#include "exclaim/extraction.hpp"
#include "exclaim/vector_index.hpp"

namespace exclaim::retrieval {

using index::Hit;

struct RetrievalConfig {
    std::size_t k = 2;
    bool exclude_self = true;

    void validate() const;
};

// Everything needed to turn a news item into vectors.
struct EngineConfig {
    extraction::ExtractorConfig extraction;
    alignment::AlignmentConfig alignment;
    embedding::EncoderProfile visual_encoder{embedding::EncoderKind::Visual, embedding::DeterministicMock{7}, 64};
    embedding::EncoderProfile text_encoder{embedding::EncoderKind::Text, embedding::DeterministicMock{7}, 64};
    RetrievalConfig retrieval;

    void validate() const;
};

struct EvidenceDatabase {
    index::VectorIndex visual;
    index::VectorIndex textual;
    index::VectorIndex event;
};

// Extraction, pairing, gating and encoding of one item.
struct ItemAnalysis {
    std::vector<VisualEntity> visuals;
    std::vector<TextualEntity> textuals;
    std::vector<alignment::AlignedEntity> aligned;
    std::vector<std::pair<embedding::EmbeddingVector, embedding::EmbeddingVector>> entity_vectors;
    embedding::EmbeddingVector event_vector;
};

ItemAnalysis analyze_item(const corpus::NewsItem& item, const EngineConfig& cfg, HttpClient* client = nullptr);

struct QueryBundle {
    std::vector<embedding::EmbeddingVector> visual_queries;
    std::vector<embedding::EmbeddingVector> textual_queries;
    embedding::EmbeddingVector event_query;

    bool operator==(const QueryBundle&) const = default;
};

QueryBundle build_queries(const corpus::NewsItem& item, const EngineConfig& cfg, HttpClient* client = nullptr);
QueryBundle to_queries(const ItemAnalysis& analysis);

// V_r, T_r, E_r before aggregation.
struct RetrievedEvidence {
    std::vector<Hit> visual;
    std::vector<Hit> textual;
    std::vector<Hit> event;
};

// Per query: kNN over the index. All hits of one granularity are merged,
// self hits dropped (when exclude_self), collapsed to the closest hit per
// source news item, sorted ascending and truncated to k. Equal distances keep
// query order, then index insertion order.
std::vector<Hit> retrieve_granularity(std::span<const embedding::EmbeddingVector> queries,
                                      const index::VectorIndex& index, const RetrievalConfig& cfg,
                                      const std::string& self_id);

RetrievedEvidence retrieve(const QueryBundle& bundle, const EvidenceDatabase& db, const RetrievalConfig& cfg,
                           const std::string& self_id);

// E_agg = {V_r, T_r, E_r}.
struct EvidenceSet {
    std::vector<Hit> visual_hits;
    std::vector<Hit> textual_hits;
    std::vector<Hit> event_hits;
    bool verified = false;

    std::size_t total() const noexcept { return visual_hits.size() + textual_hits.size() + event_hits.size(); }
    bool operator==(const EvidenceSet&) const = default;
};

EvidenceSet aggregate(RetrievedEvidence retrieved);

// Drops repeated record ids (first kept) and empty payloads, restores
// ascending distance order and one hit per source within each list.
// Idempotent; never lengthens a list.
EvidenceSet verify(EvidenceSet evidence);

nlohmann::json to_json(const Hit& hit);
nlohmann::json to_json(const EvidenceSet& evidence);
nlohmann::json to_json(const QueryBundle& bundle);

}  // namespace exclaim::retrieval

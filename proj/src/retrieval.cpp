#include "exclaim/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "exclaim/error.hpp"

namespace exclaim::retrieval {

void RetrievalConfig::validate() const {
    if (k == 0) fail(ErrorKind::InvalidConfig, "retrieval k must be at least 1");
}

void EngineConfig::validate() const {
    extraction.validate();
    alignment.validate();
    visual_encoder.validate();
    text_encoder.validate();
    retrieval.validate();
    if (visual_encoder.kind != embedding::EncoderKind::Visual || text_encoder.kind != embedding::EncoderKind::Text) {
        fail(ErrorKind::InvalidConfig, "encoder profile kinds do not match their roles");
    }
}

ItemAnalysis analyze_item(const corpus::NewsItem& item, const EngineConfig& cfg, HttpClient* client) {
    ItemAnalysis a;
    a.visuals = extraction::extract_visual(item, cfg.extraction, client);
    a.textuals = extraction::extract_textual(item, cfg.extraction, client);
    const auto candidates = extraction::pair_candidates(a.visuals, a.textuals);
    a.aligned = alignment::gate(candidates, cfg.alignment, item.id, client);
    for (const auto& e : a.aligned) {
        a.entity_vectors.push_back(embedding::encode_entity(e, cfg.visual_encoder, cfg.text_encoder, client));
    }
    a.event_vector = embedding::encode_event(item.caption, cfg.text_encoder, client);
    return a;
}

QueryBundle to_queries(const ItemAnalysis& analysis) {
    QueryBundle b;
    for (const auto& [zv, zt] : analysis.entity_vectors) {
        b.visual_queries.push_back(zv);
        b.textual_queries.push_back(zt);
    }
    b.event_query = analysis.event_vector;
    return b;
}

QueryBundle build_queries(const corpus::NewsItem& item, const EngineConfig& cfg, HttpClient* client) {
    return to_queries(analyze_item(item, cfg, client));
}

namespace {

std::size_t distinct_sources(const std::vector<Hit>& hits, bool exclude_self, const std::string& self_id) {
    std::unordered_set<std::string> seen;
    for (const auto& h : hits) {
        if (exclude_self && h.source_news_id == self_id) continue;
        seen.insert(h.source_news_id);
    }
    return seen.size();
}

}  // namespace

std::vector<Hit> retrieve_granularity(std::span<const embedding::EmbeddingVector> queries,
                                      const index::VectorIndex& index, const RetrievalConfig& cfg,
                                      const std::string& self_id) {
    cfg.validate();
    std::vector<Hit> merged;
    if (index.empty()) {
        for (const auto& q : queries) {
            if (q.dim() != index.dim()) fail(ErrorKind::DimMismatch, "query dim does not match index");
        }
        return merged;
    }
    for (const auto& q : queries) {
        // Widen the per-query search until it yields k usable sources; a
        // source in the global top-k is always within its best query's top-k
        // distinct sources.
        std::size_t want = cfg.k;
        std::vector<Hit> hits;
        for (;;) {
            hits = index.knn(q, want);
            if (want >= index.size() || distinct_sources(hits, cfg.exclude_self, self_id) >= cfg.k) break;
            want = std::min(index.size(), want * 2);
        }
        merged.insert(merged.end(), hits.begin(), hits.end());
    }

    std::stable_sort(merged.begin(), merged.end(),
                     [](const Hit& a, const Hit& b) { return a.distance < b.distance; });
    std::vector<Hit> out;
    std::unordered_set<std::string> sources;
    for (auto& h : merged) {
        if (out.size() == cfg.k) break;
        if (cfg.exclude_self && h.source_news_id == self_id) continue;
        if (!sources.insert(h.source_news_id).second) continue;
        out.push_back(std::move(h));
    }
    return out;
}

RetrievedEvidence retrieve(const QueryBundle& bundle, const EvidenceDatabase& db, const RetrievalConfig& cfg,
                           const std::string& self_id) {
    RetrievedEvidence r;
    r.visual = retrieve_granularity(bundle.visual_queries, db.visual, cfg, self_id);
    r.textual = retrieve_granularity(bundle.textual_queries, db.textual, cfg, self_id);
    r.event = retrieve_granularity(std::span(&bundle.event_query, 1), db.event, cfg, self_id);
    return r;
}

EvidenceSet aggregate(RetrievedEvidence retrieved) {
    EvidenceSet e;
    e.visual_hits = std::move(retrieved.visual);
    e.textual_hits = std::move(retrieved.textual);
    e.event_hits = std::move(retrieved.event);
    return e;
}

namespace {

std::vector<Hit> clean(std::vector<Hit> hits) {
    std::vector<Hit> unique;
    std::unordered_set<std::string> ids;
    for (auto& h : hits) {
        if (h.payload.empty() || !std::isfinite(h.distance) || h.distance < 0) continue;
        if (!ids.insert(h.record_id).second) continue;
        unique.push_back(std::move(h));
    }
    std::stable_sort(unique.begin(), unique.end(),
                     [](const Hit& a, const Hit& b) { return a.distance < b.distance; });
    std::vector<Hit> out;
    std::unordered_set<std::string> sources;
    for (auto& h : unique) {
        if (sources.insert(h.source_news_id).second) out.push_back(std::move(h));
    }
    return out;
}

}  // namespace

EvidenceSet verify(EvidenceSet evidence) {
    evidence.visual_hits = clean(std::move(evidence.visual_hits));
    evidence.textual_hits = clean(std::move(evidence.textual_hits));
    evidence.event_hits = clean(std::move(evidence.event_hits));
    evidence.verified = true;
    return evidence;
}

nlohmann::json to_json(const Hit& hit) {
    return {{"record_id", hit.record_id},
            {"source_news_id", hit.source_news_id},
            {"payload", hit.payload},
            {"distance", hit.distance}};
}

nlohmann::json to_json(const EvidenceSet& evidence) {
    auto list = [](const std::vector<Hit>& hits) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& h : hits) a.push_back(to_json(h));
        return a;
    };
    return {{"visual", list(evidence.visual_hits)},
            {"textual", list(evidence.textual_hits)},
            {"event", list(evidence.event_hits)},
            {"verified", evidence.verified}};
}

nlohmann::json to_json(const QueryBundle& bundle) {
    auto list = [](const std::vector<embedding::EmbeddingVector>& vs) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& v : vs) a.push_back(v.values);
        return a;
    };
    return {{"visual", list(bundle.visual_queries)},
            {"textual", list(bundle.textual_queries)},
            {"event", bundle.event_query.values}};
}

}  // namespace exclaim::retrieval

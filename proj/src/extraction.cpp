#include "exclaim/extraction.hpp"

#include <algorithm>
#include <cctype>

#include "exclaim/digest.hpp"
#include "exclaim/error.hpp"

namespace exclaim::extraction {

using nlohmann::json;

void ExtractorConfig::validate() const {
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) {
        fail(ErrorKind::InvalidConfig, "min_confidence must lie in [0,1]");
    }
    const auto* v = std::get_if<RemoteService>(&visual_provider);
    const auto* t = std::get_if<RemoteService>(&textual_provider);
    if ((v && v->endpoint.empty()) || (t && t->endpoint.empty())) {
        fail(ErrorKind::InvalidConfig, "remote extraction provider needs an endpoint");
    }
}

namespace {

json remote_entities(HttpClient* client, const RemoteService& service, const json& request) {
    if (client == nullptr) fail(ErrorKind::ProviderUnavailable, "no HTTP client for " + service.endpoint);
    auto reply = post_json(*client, service.endpoint, request);
    if (!reply.contains("entities") || !reply.at("entities").is_array()) {
        fail(ErrorKind::ProviderUnavailable, service.endpoint + " reply lacks an 'entities' list");
    }
    return reply.at("entities");
}

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_trailing_punct(char c) {
    return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '"' ||
           c == '\'' || c == ')' || c == ']';
}

bool is_leading_punct(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }

struct Token {
    std::size_t start;
    std::size_t end;  // excludes stripped punctuation
    bool capitalized;
    bool sentence_start;
    bool closes_run;  // punctuation followed the word
    bool ends_sentence;
};

std::vector<Token> tokenize(const std::string& caption) {
    std::vector<Token> tokens;
    bool next_starts_sentence = true;
    std::size_t i = 0;
    while (i < caption.size()) {
        while (i < caption.size() && std::isspace(static_cast<unsigned char>(caption[i]))) ++i;
        if (i >= caption.size()) break;
        std::size_t raw_end = i;
        while (raw_end < caption.size() && !std::isspace(static_cast<unsigned char>(caption[raw_end]))) ++raw_end;

        std::size_t start = i;
        std::size_t end = raw_end;
        while (start < end && is_leading_punct(caption[start])) ++start;
        while (end > start && is_trailing_punct(caption[end - 1])) --end;

        Token t{};
        t.start = start;
        t.end = end;
        t.capitalized = end > start && std::isupper(static_cast<unsigned char>(caption[start]));
        t.sentence_start = next_starts_sentence;
        t.closes_run = end < raw_end;
        t.ends_sentence = false;
        for (std::size_t p = end; p < raw_end; ++p) {
            if (is_sentence_end(caption[p])) t.ends_sentence = true;
        }
        if (end > start) tokens.push_back(t);
        next_starts_sentence = t.ends_sentence || (end == start && next_starts_sentence);
        i = raw_end;
    }
    return tokens;
}

}  // namespace

std::vector<TextualEntity> rule_based_entities(const std::string& caption) {
    std::vector<TextualEntity> out;
    const auto tokens = tokenize(caption);
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (!tokens[i].capitalized) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (!tokens[j].closes_run && j + 1 < tokens.size() && tokens[j + 1].capitalized &&
               !tokens[j + 1].sentence_start) {
            ++j;
        }
        const bool lone_sentence_initial = (i == j) && tokens[i].sentence_start;
        if (!lone_sentence_initial) {
            TextualEntity e;
            e.start = tokens[i].start;
            e.end = tokens[j].end;
            e.surface = caption.substr(e.start, e.end - e.start);
            e.ner_label = "ENT";
            e.entity_id = "t" + std::to_string(out.size());
            out.push_back(std::move(e));
        }
        i = j + 1;
    }
    return out;
}

std::vector<TextualEntity> resolve_overlaps(std::vector<TextualEntity> entities) {
    std::stable_sort(entities.begin(), entities.end(), [](const auto& a, const auto& b) {
        if (a.length() != b.length()) return a.length() > b.length();
        return a.start < b.start;
    });
    std::vector<TextualEntity> kept;
    for (auto& e : entities) {
        const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const auto& k) {
            return e.start < k.end && k.start < e.end;
        });
        if (!overlaps) kept.push_back(std::move(e));
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.start < b.start; });
    return kept;
}

std::vector<VisualEntity> extract_visual(const corpus::NewsItem& item, const ExtractorConfig& cfg,
                                         HttpClient* client) {
    cfg.validate();
    std::vector<VisualEntity> raw;
    if (item.pre_extracted) {
        raw = item.pre_extracted->visual_entities;
    } else if (const auto* remote = std::get_if<RemoteService>(&cfg.visual_provider)) {
        std::string bytes;
        if (!read_file(item.image_ref, bytes)) fail(ErrorKind::ImageUnreadable, item.image_ref);
        const json request = {{"news_id", item.id},
                              {"image_ref", item.image_ref},
                              {"image_b64", base64_encode(bytes)}};
        for (const auto& e : remote_entities(client, *remote, request)) {
            try {
                raw.push_back(visual_entity_from_json(e));
            } catch (const json::exception&) {
                // malformed entries are dropped like invalid ones
            }
        }
    }

    std::vector<VisualEntity> out;
    for (auto& e : raw) {
        if (e.valid() && e.confidence >= cfg.min_confidence) out.push_back(std::move(e));
    }
    return out;
}

std::vector<TextualEntity> extract_textual(const corpus::NewsItem& item, const ExtractorConfig& cfg,
                                           HttpClient* client) {
    cfg.validate();
    if (corpus::trim(item.caption).empty()) fail(ErrorKind::PreconditionFailed, "empty caption for " + item.id);

    std::vector<TextualEntity> raw;
    if (item.pre_extracted) {
        raw = item.pre_extracted->textual_entities;
    } else if (std::holds_alternative<RuleBased>(cfg.textual_provider)) {
        raw = rule_based_entities(item.caption);
    } else if (const auto* remote = std::get_if<RemoteService>(&cfg.textual_provider)) {
        const json request = {{"news_id", item.id}, {"caption", item.caption}};
        for (const auto& e : remote_entities(client, *remote, request)) {
            try {
                raw.push_back(textual_entity_from_json(e));
            } catch (const json::exception&) {
            }
        }
    }

    std::vector<TextualEntity> valid;
    for (auto& e : raw) {
        if (e.valid_for(item.caption)) valid.push_back(std::move(e));
    }
    return resolve_overlaps(std::move(valid));
}

std::vector<EntityPairCandidate> pair_candidates(std::span<const VisualEntity> visuals,
                                                 std::span<const TextualEntity> textuals) {
    std::vector<EntityPairCandidate> out;
    out.reserve(visuals.size() * textuals.size());
    for (const auto& v : visuals) {
        for (const auto& t : textuals) out.push_back({v, t});
    }
    return out;
}

}  // namespace exclaim::extraction

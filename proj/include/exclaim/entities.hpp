#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace exclaim {

struct BoundingBox {
    double x = 0, y = 0, w = 0, h = 0;
    bool operator==(const BoundingBox&) const = default;
};

// A detector output (v_i). `crop_ref` is an opaque handle to the cropped bytes.
struct VisualEntity {
    std::string entity_id;
    std::string class_label;
    BoundingBox region;
    std::string crop_ref;
    double confidence = 1.0;

    bool valid() const noexcept;
    bool operator==(const VisualEntity&) const = default;
};

// An NER output (t_i). Span offsets are byte offsets into the UTF-8 caption,
// half-open: [start, end).
struct TextualEntity {
    std::string entity_id;
    std::string surface;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string ner_label;

    std::size_t length() const noexcept { return end - start; }
    bool valid_for(const std::string& caption) const noexcept;
    bool operator==(const TextualEntity&) const = default;
};

struct PreExtraction {
    std::vector<VisualEntity> visual_entities;
    std::vector<TextualEntity> textual_entities;
    bool operator==(const PreExtraction&) const = default;
};

// Sidecar schema. Parsing checks structure and types only; semantic validity
// (positive box, span inside caption) is enforced by the extraction stage.
VisualEntity visual_entity_from_json(const nlohmann::json& j);
TextualEntity textual_entity_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VisualEntity& e);
nlohmann::json to_json(const TextualEntity& e);
PreExtraction pre_extraction_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PreExtraction& p);

}  // namespace exclaim

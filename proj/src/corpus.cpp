#include "exclaim/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "exclaim/error.hpp"

namespace exclaim {

using nlohmann::json;

bool VisualEntity::valid() const noexcept {
    return std::isfinite(region.w) && std::isfinite(region.h) && region.w > 0 &&
           region.h > 0 && confidence >= 0.0 && confidence <= 1.0;
}

bool TextualEntity::valid_for(const std::string& caption) const noexcept {
    return start < end && end <= caption.size() &&
           caption.compare(start, end - start, surface) == 0;
}

namespace {

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw json::other_error::create(501, std::string("missing key '") + key + "'", &j);
    return j.at(key).get<T>();
}

template <typename T>
T optional_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

}  // namespace

VisualEntity visual_entity_from_json(const json& j) {
    VisualEntity e;
    e.entity_id = optional_or<std::string>(j, "entity_id", "");
    e.class_label = required<std::string>(j, "class_label");
    const auto& r = j.at("region");
    if (r.is_array()) {
        if (r.size() != 4) throw json::other_error::create(501, "region must have 4 values", &j);
        e.region = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
    } else {
        e.region = {required<double>(r, "x"), required<double>(r, "y"),
                    required<double>(r, "w"), required<double>(r, "h")};
    }
    e.crop_ref = optional_or<std::string>(j, "crop_ref", "");
    e.confidence = optional_or<double>(j, "confidence", 1.0);
    return e;
}

TextualEntity textual_entity_from_json(const json& j) {
    TextualEntity e;
    e.entity_id = optional_or<std::string>(j, "entity_id", "");
    e.surface = required<std::string>(j, "surface");
    const auto& span = j.at("span");
    if (!span.is_array() || span.size() != 2) {
        throw json::other_error::create(501, "span must be [start, end]", &j);
    }
    const auto start = span[0].get<std::int64_t>();
    const auto end = span[1].get<std::int64_t>();
    if (start < 0 || end < 0) throw json::other_error::create(501, "negative span offset", &j);
    e.start = static_cast<std::size_t>(start);
    e.end = static_cast<std::size_t>(end);
    e.ner_label = optional_or<std::string>(j, "ner_label", "ENT");
    return e;
}

json to_json(const VisualEntity& e) {
    return {{"entity_id", e.entity_id},
            {"class_label", e.class_label},
            {"region", {{"x", e.region.x}, {"y", e.region.y}, {"w", e.region.w}, {"h", e.region.h}}},
            {"crop_ref", e.crop_ref},
            {"confidence", e.confidence}};
}

json to_json(const TextualEntity& e) {
    return {{"entity_id", e.entity_id},
            {"surface", e.surface},
            {"span", {e.start, e.end}},
            {"ner_label", e.ner_label}};
}

PreExtraction pre_extraction_from_json(const json& j) {
    PreExtraction p;
    if (!j.is_object()) throw json::other_error::create(501, "pre_extracted must be an object", &j);
    if (j.contains("visual_entities")) {
        for (const auto& v : j.at("visual_entities")) p.visual_entities.push_back(visual_entity_from_json(v));
    }
    if (j.contains("textual_entities")) {
        for (const auto& t : j.at("textual_entities")) p.textual_entities.push_back(textual_entity_from_json(t));
    }
    return p;
}

json to_json(const PreExtraction& p) {
    json visuals = json::array();
    for (const auto& v : p.visual_entities) visuals.push_back(to_json(v));
    json textuals = json::array();
    for (const auto& t : p.textual_entities) textuals.push_back(to_json(t));
    return {{"visual_entities", std::move(visuals)}, {"textual_entities", std::move(textuals)}};
}

}  // namespace exclaim

namespace exclaim::corpus {

using nlohmann::json;

std::string_view to_string(Label label) noexcept {
    return label == Label::Falsified ? "falsified" : "pristine";
}

std::string_view to_string(Category category) noexcept {
    switch (category) {
        case Category::TextImage: return "text_image";
        case Category::TextText: return "text_text";
        case Category::PersonMatching: return "person";
        case Category::SceneMatching: return "scene";
    }
    return "";
}

std::string_view display_name(Category category) noexcept {
    switch (category) {
        case Category::TextImage: return "Text-Image";
        case Category::TextText: return "Text-Text";
        case Category::PersonMatching: return "Person-Matching";
        case Category::SceneMatching: return "Scene-Matching";
    }
    return "";
}

std::optional<Label> parse_label(std::string_view text) {
    if (text == "falsified") return Label::Falsified;
    if (text == "pristine") return Label::Pristine;
    return std::nullopt;
}

std::optional<Category> parse_category(std::string_view text) {
    for (auto c : k_all_categories) {
        if (to_string(c) == text) return c;
    }
    return std::nullopt;
}

std::string trim(std::string_view text) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!text.empty() && is_space(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && is_space(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    return std::string(text);
}

namespace {

const std::unordered_set<std::string> k_known_keys = {
    "id", "image_ref", "caption", "label", "category", "pre_extracted"};

[[noreturn]] void malformed(std::size_t line_no, const std::string& what) {
    fail(ErrorKind::MalformedRecord,
         line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what);
}

}  // namespace

NewsItem item_from_json(const json& record, std::size_t line_no) {
    if (!record.is_object()) malformed(line_no, "record is not an object");
    NewsItem item;
    try {
        for (const char* key : {"id", "image_ref", "caption"}) {
            if (!record.contains(key)) malformed(line_no, std::string("missing required key '") + key + "'");
            if (!record.at(key).is_string()) malformed(line_no, std::string("key '") + key + "' must be a string");
        }
        item.id = record.at("id").get<std::string>();
        item.image_ref = record.at("image_ref").get<std::string>();
        item.caption = record.at("caption").get<std::string>();

        if (record.contains("label") && !record.at("label").is_null()) {
            const auto text = record.at("label").get<std::string>();
            item.label = parse_label(text);
            if (!item.label) malformed(line_no, "unknown label '" + text + "'");
        }
        if (record.contains("category") && !record.at("category").is_null()) {
            const auto text = record.at("category").get<std::string>();
            item.category = parse_category(text);
            if (!item.category) malformed(line_no, "unknown category '" + text + "'");
        }
        if (record.contains("pre_extracted") && !record.at("pre_extracted").is_null()) {
            item.pre_extracted = pre_extraction_from_json(record.at("pre_extracted"));
        }
    } catch (const json::exception& e) {
        malformed(line_no, e.what());
    }

    if (item.id.empty()) malformed(line_no, "empty id");
    if (trim(item.caption).empty()) malformed(line_no, "caption is empty for id '" + item.id + "'");

    for (const auto& [key, value] : record.items()) {
        if (!k_known_keys.contains(key)) item.extra[key] = value;
    }
    return item;
}

json to_json(const NewsItem& item) {
    json j = item.extra.is_object() ? item.extra : json::object();
    j["id"] = item.id;
    j["image_ref"] = item.image_ref;
    j["caption"] = item.caption;
    if (item.label) j["label"] = to_string(*item.label);
    if (item.category) j["category"] = to_string(*item.category);
    if (item.pre_extracted) j["pre_extracted"] = exclaim::to_json(*item.pre_extracted);
    return j;
}

CorpusManifest summarize(std::span<const NewsItem> items, std::string split_name,
                         std::filesystem::path source) {
    CorpusManifest m;
    m.split_name = std::move(split_name);
    m.source_path = std::move(source);
    m.items = items.size();
    for (auto c : k_all_categories) m.categories[c] = 0;
    for (const auto& item : items) {
        if (item.category) {
            ++m.categories[*item.category];
        } else {
            ++m.uncategorized;
        }
        if (item.label) ++m.labeled;
    }
    return m;
}

json to_json(const CorpusManifest& manifest) {
    json cats = json::object();
    for (const auto& [c, n] : manifest.categories) cats[std::string(to_string(c))] = n;
    return {{"split_name", manifest.split_name},
            {"items", manifest.items},
            {"source_path", manifest.source_path.string()},
            {"categories", cats},
            {"uncategorized", manifest.uncategorized},
            {"labeled", manifest.labeled}};
}

Corpus parse_corpus(std::istream& in, std::string split_name, std::filesystem::path source) {
    Corpus corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto record = json::parse(line, nullptr, false);
        if (record.is_discarded()) malformed(line_no, "not a JSON object");
        auto item = item_from_json(record, line_no);
        if (!seen.insert(item.id).second) fail(ErrorKind::DuplicateId, item.id);
        corpus.items.push_back(std::move(item));
    }
    if (in.bad()) fail(ErrorKind::Io, "read error in " + source.string());
    corpus.manifest = summarize(corpus.items, std::move(split_name), std::move(source));
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open corpus " + path.string());
    return parse_corpus(in, path.stem().string(), path);
}

void write_corpus(std::ostream& out, std::span<const NewsItem> items) {
    for (const auto& item : items) out << to_json(item).dump() << '\n';
}

void save_corpus(const std::filesystem::path& path, std::span<const NewsItem> items) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    write_corpus(out, items);
}

std::vector<std::string> validate_item(const NewsItem& item, ValidationMode mode) {
    std::vector<std::string> violations;
    if (item.id.empty()) violations.emplace_back("empty id");
    if (trim(item.caption).empty()) violations.emplace_back("empty caption");
    if (mode == ValidationMode::Eval && !item.label) violations.emplace_back("missing label");
    return violations;
}

}  // namespace exclaim::corpus

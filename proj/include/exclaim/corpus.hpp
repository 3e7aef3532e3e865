#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exclaim/entities.hpp"

namespace exclaim::corpus {

enum class Label { Falsified, Pristine };

// The four retrieval strategies used to build mismatched pairs.
enum class Category { TextImage, TextText, PersonMatching, SceneMatching };

inline constexpr Category k_all_categories[] = {
    Category::TextImage, Category::TextText, Category::PersonMatching, Category::SceneMatching};

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Category category) noexcept;
std::string_view display_name(Category category) noexcept;
std::optional<Label> parse_label(std::string_view text);
std::optional<Category> parse_category(std::string_view text);

struct NewsItem {
    std::string id;
    std::string image_ref;
    std::string caption;
    std::optional<Label> label;
    std::optional<Category> category;
    std::optional<PreExtraction> pre_extracted;
    // Fields not understood by this engine, kept so records survive a rewrite.
    nlohmann::json extra = nlohmann::json::object();

    bool operator==(const NewsItem&) const = default;
};

struct CorpusManifest {
    std::string split_name;
    std::size_t items = 0;
    std::filesystem::path source_path;
    std::map<Category, std::size_t> categories;
    std::size_t uncategorized = 0;
    std::size_t labeled = 0;
};

struct Corpus {
    CorpusManifest manifest;
    std::vector<NewsItem> items;
};

// Parses one record. Throws MalformedRecord (prefixed with `line_no` when
// nonzero) on a schema violation.
NewsItem item_from_json(const nlohmann::json& record, std::size_t line_no = 0);
nlohmann::json to_json(const NewsItem& item);

// Loads a line-delimited corpus. Blank lines are skipped. Throws
// MalformedRecord (message starts with "line N") or DuplicateId.
Corpus load_corpus(const std::filesystem::path& path);
Corpus parse_corpus(std::istream& in, std::string split_name = "stream",
                    std::filesystem::path source = {});

void write_corpus(std::ostream& out, std::span<const NewsItem> items);
void save_corpus(const std::filesystem::path& path, std::span<const NewsItem> items);

CorpusManifest summarize(std::span<const NewsItem> items, std::string split_name = {},
                         std::filesystem::path source = {});
nlohmann::json to_json(const CorpusManifest& manifest);

enum class ValidationMode { Train, Eval };

// Returns an empty list when the item is acceptable for the given mode.
std::vector<std::string> validate_item(const NewsItem& item, ValidationMode mode);

std::string trim(std::string_view text);

}  // namespace exclaim::corpus

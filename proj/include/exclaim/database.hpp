#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include <json.hpp>

#include "exclaim/retrieval.hpp"

namespace exclaim::database {

struct BuildReport {
    std::size_t items = 0;
    std::size_t items_without_entities = 0;
    std::size_t aligned_entities = 0;
    std::size_t visual_records = 0;
    std::size_t textual_records = 0;
    std::size_t event_records = 0;
};

nlohmann::json to_json(const BuildReport& report);

struct BuildResult {
    retrieval::EvidenceDatabase db;
    BuildReport report;
};

// Offline construction of the three indices. Each item contributes one event
// record ("<id>#e", payload = caption) and, per aligned entity j, a visual
// record ("<id>#v<j>", payload = class label) and a textual record
// ("<id>#t<j>", payload = surface). Items without aligned entities contribute
// only the event record.
BuildResult build_database(std::span<const corpus::NewsItem> items, const retrieval::EngineConfig& cfg,
                           HttpClient* client = nullptr);

inline constexpr const char* k_visual_file = "visual.exg";
inline constexpr const char* k_textual_file = "textual.exg";
inline constexpr const char* k_event_file = "event.exg";

std::size_t save_database(const retrieval::EvidenceDatabase& db, const std::filesystem::path& dir);
// Throws CorruptIndex when a file holds the wrong granularity.
retrieval::EvidenceDatabase load_database(const std::filesystem::path& dir);

}  // namespace exclaim::database

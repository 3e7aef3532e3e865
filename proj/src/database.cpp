#include "exclaim/database.hpp"

#include "exclaim/error.hpp"

namespace exclaim::database {

using index::Granularity;

nlohmann::json to_json(const BuildReport& r) {
    return {{"items", r.items},
            {"items_without_entities", r.items_without_entities},
            {"aligned_entities", r.aligned_entities},
            {"visual_records", r.visual_records},
            {"textual_records", r.textual_records},
            {"event_records", r.event_records}};
}

BuildResult build_database(std::span<const corpus::NewsItem> items, const retrieval::EngineConfig& cfg,
                           HttpClient* client) {
    cfg.validate();
    std::vector<index::IndexRecord> visual, textual, event;
    BuildReport report;
    for (const auto& item : items) {
        const auto a = retrieval::analyze_item(item, cfg, client);
        ++report.items;
        if (a.aligned.empty()) ++report.items_without_entities;
        report.aligned_entities += a.aligned.size();
        for (std::size_t j = 0; j < a.aligned.size(); ++j) {
            const auto& pair = a.aligned[j].pair;
            const auto suffix = std::to_string(j);
            visual.push_back(index::make_record(item.id + "#v" + suffix, item.id, pair.visual.class_label,
                                                a.entity_vectors[j].first));
            textual.push_back(index::make_record(item.id + "#t" + suffix, item.id, pair.textual.surface,
                                                 a.entity_vectors[j].second));
        }
        event.push_back(index::make_record(item.id + "#e", item.id, item.caption, a.event_vector));
    }
    report.visual_records = visual.size();
    report.textual_records = textual.size();
    report.event_records = event.size();

    BuildResult result;
    result.db.visual = index::build_index(Granularity::Visual, cfg.visual_encoder.dim, std::move(visual));
    result.db.textual = index::build_index(Granularity::Textual, cfg.text_encoder.dim, std::move(textual));
    result.db.event = index::build_index(Granularity::Event, cfg.text_encoder.dim, std::move(event));
    result.report = report;
    return result;
}

std::size_t save_database(const retrieval::EvidenceDatabase& db, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    return index::save_index(db.visual, dir / k_visual_file) + index::save_index(db.textual, dir / k_textual_file) +
           index::save_index(db.event, dir / k_event_file);
}

namespace {

index::VectorIndex load_expecting(const std::filesystem::path& path, Granularity g) {
    auto idx = index::load_index(path);
    if (idx.granularity() != g) {
        fail(ErrorKind::CorruptIndex, path.string() + " holds a " + std::string(index::to_string(idx.granularity())) +
                                          " index, expected " + std::string(index::to_string(g)));
    }
    return idx;
}

}  // namespace

retrieval::EvidenceDatabase load_database(const std::filesystem::path& dir) {
    return {load_expecting(dir / k_visual_file, Granularity::Visual),
            load_expecting(dir / k_textual_file, Granularity::Textual),
            load_expecting(dir / k_event_file, Granularity::Event)};
}

}  // namespace exclaim::database

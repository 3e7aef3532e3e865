#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "exclaim/corpus.hpp"
#include "exclaim/llm_gateway.hpp"
#include "exclaim/retrieval.hpp"

namespace exclaim::agents {

// Which stages run and which evidence lists reach the prompts. The Analyst
// always runs.
struct PipelineConfig {
    bool use_retrieval_agent = true;
    bool use_detective_agent = true;
    bool use_event_evidence = true;
    bool use_entity_evidence = true;

    bool any_evidence() const noexcept { return use_event_evidence || use_entity_evidence; }
    // e.g. "analyst+detective+retrieval/event+entity"
    std::string label() const;
    bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// The six component combinations of the ablation study, in table order:
// analyst only; analyst with evidence; analyst+detective with evidence;
// analyst+retrieval with evidence; all agents with event evidence only; full.
std::vector<PipelineConfig> ablation_rows();

inline constexpr std::array<std::string_view, 5> k_elements = {"time", "place", "person", "event", "object"};

enum class ElementStatus { Consistent, Contradicted, Unknown };
std::string_view to_string(ElementStatus s) noexcept;

struct ElementCheck {
    ElementStatus status = ElementStatus::Unknown;
    std::string note;
    bool operator==(const ElementCheck&) const = default;
};

struct RetrievalFindings {
    std::vector<std::string> flagged_inconsistencies;
    std::string stage_raw;
};

struct DetectiveFindings {
    std::map<std::string, ElementCheck> element_checks;  // always holds all five elements
    std::string stage_raw;

    bool any_contradicted() const;
};

// One gateway call within a stage.
struct StageCall {
    std::string prompt_digest;
    std::string response;
};

struct StageRecord {
    std::string stage;
    std::vector<StageCall> calls;
    nlohmann::json parsed;
};

// O_final = (C_OOC, T_exp) plus how it was reached.
struct Verdict {
    int c_ooc = 0;
    std::string explanation;
    std::vector<StageRecord> trace;
    PipelineConfig config_used;
};

nlohmann::json to_json(const StageRecord& r);
nlohmann::json to_json(const Verdict& v);

struct PromptTemplates {
    std::string version;
    std::string system;
    std::string retrieval;
    std::string detective;
    std::string analyst;
    std::string analyst_repair;

    static PromptTemplates builtin();
    // Reads system.txt, retrieval.txt, ... from a directory.
    static PromptTemplates load(const std::filesystem::path& dir);
};

// Replaces every "{{name}}" with its value; unknown placeholders are left as is.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

struct AgentSettings {
    double temperature = llm::k_default_temperature;
    int max_tokens = llm::k_default_max_tokens;
    bool send_images = true;
    PromptTemplates prompts = PromptTemplates::builtin();
};

// Lines "[granularity] source=<id> dist=<d.dddd> :: <payload>" in V, T, E
// order, restricted to the lists enabled in `cfg`. Throws UnverifiedEvidence.
std::string render_evidence(const retrieval::EvidenceSet& evidence, const PipelineConfig& cfg);

// Lines under a "FLAGS:" heading that start with "- " or "* ".
RetrievalFindings parse_retrieval_response(const std::string& text);
// "ELEMENT <name>: <status> - <note>" lines; missing elements become unknown.
DetectiveFindings parse_detective_response(const std::string& text);

struct ParsedVerdict {
    int c_ooc = 0;
    std::string explanation;
};
// The last non-blank line must read "VERDICT: OOC" or "VERDICT: PRISTINE".
std::optional<ParsedVerdict> parse_verdict(const std::string& text);

std::string render_retrieval_findings(const RetrievalFindings& f);
std::string render_detective_findings(const DetectiveFindings& f);

// Everything a stage needs besides its priors.
struct StageContext {
    const corpus::NewsItem& item;
    std::string image_note;
    std::string evidence_text;
    llm::LlmGateway& gateway;
    const AgentSettings& settings;
};

RetrievalFindings run_retrieval_agent(const StageContext& ctx, StageRecord* record = nullptr);
DetectiveFindings run_detective_agent(const StageContext& ctx, const RetrievalFindings* prior,
                                      StageRecord* record = nullptr);
// Issues one repair call when the first answer lacks a verdict line; throws
// UnparseableVerdict when the repair also fails.
Verdict run_analyst_agent(const StageContext& ctx, const RetrievalFindings* retrieval_prior,
                          const DetectiveFindings* detective_prior);

struct PipelineResult {
    Verdict verdict;
    std::optional<retrieval::EvidenceSet> evidence;  // absent when no retrieval ran
};

// Retrieval -> Detective -> Analyst with disabled stages skipped. When both
// evidence flags are off the evidence database is never consulted.
class DetectionPipeline {
public:
    DetectionPipeline(retrieval::EngineConfig engine, std::shared_ptr<const retrieval::EvidenceDatabase> db,
                      std::shared_ptr<llm::LlmGateway> gateway, AgentSettings settings = {},
                      std::shared_ptr<HttpClient> client = nullptr);

    PipelineResult run(const corpus::NewsItem& item, const PipelineConfig& cfg) const;

    const retrieval::EngineConfig& engine() const noexcept { return engine_; }
    llm::LlmGateway& gateway() const noexcept { return *gateway_; }
    bool has_database() const noexcept { return db_ != nullptr; }

private:
    retrieval::EngineConfig engine_;
    std::shared_ptr<const retrieval::EvidenceDatabase> db_;
    std::shared_ptr<llm::LlmGateway> gateway_;
    AgentSettings settings_;
    std::shared_ptr<HttpClient> client_;
};

}  // namespace exclaim::agents

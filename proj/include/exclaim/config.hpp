#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "exclaim/agents.hpp"
#include "exclaim/llm_gateway.hpp"
#include "exclaim/retrieval.hpp"

namespace exclaim::config {

// One configuration file with a section per module:
//
//   {
//     "extraction": {"visual_provider": "sidecar", "textual_provider": "rule_based",
//                    "visual_endpoint": "...", "textual_endpoint": "...", "min_confidence": 0.0},
//     "alignment":  {"scorer": "lexical", "endpoint": "...", "tau": 0.5},
//     "embedding":  {"visual": {"provider": "mock", "seed": 7, "dim": 64},
//                    "text":   {"provider": "remote", "endpoint": "...", "dim": 768}},
//     "retrieval":  {"k": 2, "exclude_self": true},
//     "gateway":    {"provider": "rule" | "scripted" | "remote", "script": "...",
//                    "endpoint": "...", "model": "gpt-4o", "credential_env": "OPENAI_API_KEY",
//                    "max_attempts": 3, "backoff_ms": 200, "cache_dir": "...",
//                    "max_in_flight": 4, "send_images": true},
//     "agents":     {"prompts": "builtin" | "<dir>", "temperature": 0.6, "max_tokens": 4096,
//                    "send_images": true,
//                    "pipeline": {"retrieval_agent": true, "detective_agent": true,
//                                 "event_evidence": true, "entity_evidence": true}}
//   }
//
// Every key is optional; unknown keys are rejected. Relative paths resolve
// against the file's directory.
struct AppConfig {
    retrieval::EngineConfig engine;
    llm::GatewayConfig gateway;
    agents::AgentSettings agents;
    agents::PipelineConfig pipeline;
    std::string prompts_source = "builtin";
};

AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const AppConfig& cfg);

}  // namespace exclaim::config

#include "exclaim/config.hpp"

#include <fstream>
#include <set>

#include "exclaim/error.hpp"

namespace exclaim::config {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& section, std::set<std::string> allowed) {
    if (!j.is_object()) fail(ErrorKind::InvalidConfig, "section '" + section + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) fail(ErrorKind::InvalidConfig, "unknown key '" + section + "." + key + "'");
    }
}

template <typename T>
T get(const json& j, const char* key, T fallback, const std::string& section) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::InvalidConfig, "bad type for '" + section + "." + key + "'");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::string require_endpoint(const json& j, const char* key, const std::string& section) {
    const auto endpoint = get<std::string>(j, key, "", section);
    if (endpoint.empty()) fail(ErrorKind::InvalidConfig, "'" + section + "." + key + "' is required for remote providers");
    return endpoint;
}

embedding::EncoderProfile encoder(const json& j, embedding::EncoderKind kind, const std::string& section,
                                  const embedding::EncoderProfile& fallback) {
    only_keys(j, section, {"provider", "seed", "endpoint", "dim"});
    embedding::EncoderProfile p = fallback;
    p.kind = kind;
    const auto provider = get<std::string>(j, "provider", "mock", section);
    if (provider == "mock") {
        p.provider = embedding::DeterministicMock{get<std::uint64_t>(j, "seed", 7, section)};
    } else if (provider == "remote") {
        p.provider = RemoteService{require_endpoint(j, "endpoint", section)};
    } else {
        fail(ErrorKind::InvalidConfig, "unknown encoder provider '" + provider + "'");
    }
    p.dim = get<std::size_t>(j, "dim", p.dim, section);
    return p;
}

}  // namespace

AppConfig from_json(const json& j, const std::filesystem::path& base_dir) {
    only_keys(j, "<root>", {"extraction", "alignment", "embedding", "retrieval", "gateway", "agents"});
    AppConfig cfg;
    auto& engine = cfg.engine;

    if (j.contains("extraction")) {
        const auto& s = j.at("extraction");
        only_keys(s, "extraction", {"visual_provider", "textual_provider", "visual_endpoint", "textual_endpoint", "min_confidence"});
        const auto visual = get<std::string>(s, "visual_provider", "sidecar", "extraction");
        if (visual == "sidecar") {
            engine.extraction.visual_provider = extraction::Sidecar{};
        } else if (visual == "remote") {
            engine.extraction.visual_provider = RemoteService{require_endpoint(s, "visual_endpoint", "extraction")};
        } else {
            fail(ErrorKind::InvalidConfig, "unknown visual provider '" + visual + "'");
        }
        const auto textual = get<std::string>(s, "textual_provider", "rule_based", "extraction");
        if (textual == "sidecar") {
            engine.extraction.textual_provider = extraction::Sidecar{};
        } else if (textual == "rule_based") {
            engine.extraction.textual_provider = extraction::RuleBased{};
        } else if (textual == "remote") {
            engine.extraction.textual_provider = RemoteService{require_endpoint(s, "textual_endpoint", "extraction")};
        } else {
            fail(ErrorKind::InvalidConfig, "unknown textual provider '" + textual + "'");
        }
        engine.extraction.min_confidence = get<double>(s, "min_confidence", 0.0, "extraction");
    }

    if (j.contains("alignment")) {
        const auto& s = j.at("alignment");
        only_keys(s, "alignment", {"scorer", "endpoint", "tau"});
        const auto scorer = get<std::string>(s, "scorer", "lexical", "alignment");
        if (scorer == "lexical") {
            engine.alignment.scorer = alignment::LexicalOverlap{};
        } else if (scorer == "remote") {
            engine.alignment.scorer = RemoteService{require_endpoint(s, "endpoint", "alignment")};
        } else {
            fail(ErrorKind::InvalidConfig, "unknown alignment scorer '" + scorer + "'");
        }
        engine.alignment.threshold = get<double>(s, "tau", 0.5, "alignment");
    }

    if (j.contains("embedding")) {
        const auto& s = j.at("embedding");
        only_keys(s, "embedding", {"visual", "text"});
        if (s.contains("visual")) {
            engine.visual_encoder = encoder(s.at("visual"), embedding::EncoderKind::Visual, "embedding.visual", engine.visual_encoder);
        }
        if (s.contains("text")) {
            engine.text_encoder = encoder(s.at("text"), embedding::EncoderKind::Text, "embedding.text", engine.text_encoder);
        }
    }

    if (j.contains("retrieval")) {
        const auto& s = j.at("retrieval");
        only_keys(s, "retrieval", {"k", "exclude_self"});
        engine.retrieval.k = get<std::size_t>(s, "k", 2, "retrieval");
        engine.retrieval.exclude_self = get<bool>(s, "exclude_self", true, "retrieval");
    }

    if (j.contains("gateway")) {
        const auto& s = j.at("gateway");
        only_keys(s, "gateway", {"provider", "script", "endpoint", "model", "credential_env", "max_attempts",
                                 "backoff_ms", "cache_dir", "max_in_flight", "send_images"});
        const auto provider = get<std::string>(s, "provider", "rule", "gateway");
        if (provider == "rule") {
            cfg.gateway.provider = llm::RuleSpec{};
        } else if (provider == "scripted") {
            const auto script = get<std::string>(s, "script", "", "gateway");
            if (script.empty()) fail(ErrorKind::InvalidConfig, "'gateway.script' is required for the scripted provider");
            cfg.gateway.provider = llm::ScriptedSpec{resolve(base_dir, script)};
        } else if (provider == "remote") {
            llm::RemoteEndpoint remote;
            remote.endpoint = require_endpoint(s, "endpoint", "gateway");
            remote.model = get<std::string>(s, "model", remote.model, "gateway");
            remote.credential_env = get<std::string>(s, "credential_env", remote.credential_env, "gateway");
            cfg.gateway.provider = remote;
        } else {
            fail(ErrorKind::InvalidConfig, "unknown gateway provider '" + provider + "'");
        }
        cfg.gateway.retry.max_attempts = get<int>(s, "max_attempts", 3, "gateway");
        cfg.gateway.retry.backoff_base = std::chrono::milliseconds(get<int>(s, "backoff_ms", 200, "gateway"));
        if (s.contains("cache_dir")) cfg.gateway.cache_dir = resolve(base_dir, get<std::string>(s, "cache_dir", "", "gateway"));
        cfg.gateway.max_in_flight = get<std::size_t>(s, "max_in_flight", 4, "gateway");
        cfg.gateway.send_images = get<bool>(s, "send_images", true, "gateway");
    }

    if (j.contains("agents")) {
        const auto& s = j.at("agents");
        only_keys(s, "agents", {"prompts", "temperature", "max_tokens", "send_images", "pipeline"});
        cfg.prompts_source = get<std::string>(s, "prompts", "builtin", "agents");
        if (cfg.prompts_source != "builtin") {
            cfg.agents.prompts = agents::PromptTemplates::load(resolve(base_dir, cfg.prompts_source));
        }
        cfg.agents.temperature = get<double>(s, "temperature", llm::k_default_temperature, "agents");
        cfg.agents.max_tokens = get<int>(s, "max_tokens", llm::k_default_max_tokens, "agents");
        cfg.agents.send_images = get<bool>(s, "send_images", true, "agents");
        if (s.contains("pipeline")) cfg.pipeline = agents::pipeline_config_from_json(s.at("pipeline"));
    }

    engine.validate();
    cfg.gateway.validate();
    if (cfg.agents.temperature < 0) fail(ErrorKind::InvalidConfig, "temperature must be >= 0");
    if (cfg.agents.max_tokens < 1) fail(ErrorKind::InvalidConfig, "max_tokens must be >= 1");
    return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::InvalidConfig, path.string() + " is not valid JSON");
    return from_json(j, path.parent_path());
}

namespace {

json encoder_json(const embedding::EncoderProfile& p) {
    if (const auto* mock = std::get_if<embedding::DeterministicMock>(&p.provider)) {
        return {{"provider", "mock"}, {"seed", mock->seed}, {"dim", p.dim}};
    }
    return {{"provider", "remote"}, {"endpoint", std::get<RemoteService>(p.provider).endpoint}, {"dim", p.dim}};
}

}  // namespace

json to_json(const AppConfig& cfg) {
    const auto& e = cfg.engine;
    json extraction = {{"min_confidence", e.extraction.min_confidence}};
    if (const auto* r = std::get_if<RemoteService>(&e.extraction.visual_provider)) {
        extraction["visual_provider"] = "remote";
        extraction["visual_endpoint"] = r->endpoint;
    } else {
        extraction["visual_provider"] = "sidecar";
    }
    if (const auto* r = std::get_if<RemoteService>(&e.extraction.textual_provider)) {
        extraction["textual_provider"] = "remote";
        extraction["textual_endpoint"] = r->endpoint;
    } else {
        extraction["textual_provider"] =
            std::holds_alternative<extraction::Sidecar>(e.extraction.textual_provider) ? "sidecar" : "rule_based";
    }
    json alignment = {{"tau", e.alignment.threshold}};
    if (const auto* r = std::get_if<RemoteService>(&e.alignment.scorer)) {
        alignment["scorer"] = "remote";
        alignment["endpoint"] = r->endpoint;
    } else {
        alignment["scorer"] = "lexical";
    }
    json gateway = {{"max_attempts", cfg.gateway.retry.max_attempts},
                    {"backoff_ms", cfg.gateway.retry.backoff_base.count()},
                    {"max_in_flight", cfg.gateway.max_in_flight},
                    {"send_images", cfg.gateway.send_images}};
    if (cfg.gateway.cache_dir) gateway["cache_dir"] = cfg.gateway.cache_dir->string();
    if (const auto* r = std::get_if<llm::RemoteEndpoint>(&cfg.gateway.provider)) {
        gateway["provider"] = "remote";
        gateway["endpoint"] = r->endpoint;
        gateway["model"] = r->model;
        gateway["credential_env"] = r->credential_env;
    } else if (const auto* s = std::get_if<llm::ScriptedSpec>(&cfg.gateway.provider)) {
        gateway["provider"] = "scripted";
        gateway["script"] = s->script.string();
    } else {
        gateway["provider"] = "rule";
    }
    return {{"extraction", extraction},
            {"alignment", alignment},
            {"embedding", {{"visual", encoder_json(e.visual_encoder)}, {"text", encoder_json(e.text_encoder)}}},
            {"retrieval", {{"k", e.retrieval.k}, {"exclude_self", e.retrieval.exclude_self}}},
            {"gateway", gateway},
            {"agents",
             {{"prompts", cfg.prompts_source},
              {"temperature", cfg.agents.temperature},
              {"max_tokens", cfg.agents.max_tokens},
              {"send_images", cfg.agents.send_images},
              {"pipeline", agents::to_json(cfg.pipeline)}}}};
}

}  // namespace exclaim::config

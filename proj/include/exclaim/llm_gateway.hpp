#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "exclaim/http.hpp"

namespace exclaim::llm {

inline constexpr double k_default_temperature = 0.6;
inline constexpr int k_default_max_tokens = 4096;

struct ChatRequest {
    std::string system_prompt;
    std::vector<std::string> user_messages;
    double temperature = k_default_temperature;
    int max_tokens = k_default_max_tokens;
    std::vector<std::string> image_refs;
    // Routing metadata: pipeline stage ("retrieval", "detective", "analyst",
    // "analyst_repair") and the news item id.
    std::string stage;
    std::string sample_id;

    void validate() const;
};

struct ChatResponse {
    std::string text;
    nlohmann::json provider_meta = nlohmann::json::object();
};

// SHA-256 over a length-prefixed encoding of every request field, hex encoded.
std::string request_digest(const ChatRequest& req);

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    // Remote providers count against the in-flight bound and are retried.
    virtual bool is_remote() const { return false; }
    virtual std::string name() const = 0;
};

// Returns canned responses keyed by (stage, sample id). Script files are
// line-delimited records {"stage": ..., "sample": ..., "response": ...}.
class ScriptedMockProvider final : public ChatProvider {
public:
    using Key = std::pair<std::string, std::string>;

    explicit ScriptedMockProvider(std::map<Key, std::string> entries) : entries_(std::move(entries)) {}
    static std::shared_ptr<ScriptedMockProvider> from_file(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& req) override;
    std::string name() const override { return "scripted"; }

private:
    std::map<Key, std::string> entries_;
};

struct RemoteEndpoint {
    std::string endpoint;
    std::string model = "gpt-4o";
    std::string credential_env = "OPENAI_API_KEY";
};

// Chat-completion style HTTP provider: POST {model, messages, temperature,
// max_tokens}; reads choices[0].message.content.
class RemoteProvider final : public ChatProvider {
public:
    RemoteProvider(RemoteEndpoint endpoint, std::shared_ptr<HttpClient> client, bool send_images = true);

    ChatResponse complete(const ChatRequest& req) override;
    bool is_remote() const override { return true; }
    std::string name() const override { return "remote:" + endpoint_.model; }

    nlohmann::json build_body(const ChatRequest& req) const;

private:
    RemoteEndpoint endpoint_;
    std::shared_ptr<HttpClient> client_;
    bool send_images_;
};

struct ScriptedSpec {
    std::filesystem::path script;
};
struct RuleSpec {};
using ProviderSpec = std::variant<RemoteEndpoint, ScriptedSpec, RuleSpec>;

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{200};
};

struct GatewayConfig {
    ProviderSpec provider = RuleSpec{};
    RetryPolicy retry;
    std::optional<std::filesystem::path> cache_dir;
    std::size_t max_in_flight = 4;
    bool send_images = true;

    void validate() const;
};

// Shared front door for all agent calls: request-digest cache, retries with
// exponential backoff for remote providers, and a bound on concurrent remote
// calls.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<ChatProvider> provider, RetryPolicy retry = {},
               std::optional<std::filesystem::path> cache_dir = std::nullopt, std::size_t max_in_flight = 4);

    // Throws ProviderExhausted when every remote attempt fails with
    // ProviderUnavailable; other errors (ScriptMissing, ...) propagate as-is.
    ChatResponse complete(const ChatRequest& req);

    std::size_t provider_calls() const noexcept { return provider_calls_.load(); }
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
    const ChatProvider& provider() const noexcept { return *provider_; }

private:
    std::optional<std::string> cache_get(const std::string& digest) const;
    void cache_put(const std::string& digest, const std::string& text) const;
    ChatResponse call_with_retry(const ChatRequest& req);

    std::shared_ptr<ChatProvider> provider_;
    RetryPolicy retry_;
    std::optional<std::filesystem::path> cache_dir_;
    std::counting_semaphore<> in_flight_;
    std::atomic<std::size_t> provider_calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
};

std::shared_ptr<ChatProvider> make_provider(const GatewayConfig& cfg, std::shared_ptr<HttpClient> client);
std::shared_ptr<LlmGateway> make_gateway(const GatewayConfig& cfg, std::shared_ptr<HttpClient> client = nullptr);

}  // namespace exclaim::llm

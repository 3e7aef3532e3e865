#include "exclaim/llm_gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "exclaim/digest.hpp"
#include "exclaim/error.hpp"
#include "exclaim/rule_mock.hpp"

namespace exclaim::llm {

using nlohmann::json;

void ChatRequest::validate() const {
    if (!(temperature >= 0.0)) fail(ErrorKind::PreconditionFailed, "temperature must be >= 0");
    if (max_tokens < 1) fail(ErrorKind::PreconditionFailed, "max_tokens must be >= 1");
}

namespace {

void field(std::string& buf, std::string_view tag, std::string_view value) {
    buf.append(tag);
    buf.append(std::to_string(value.size()));
    buf.push_back(':');
    buf.append(value);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string request_digest(const ChatRequest& req) {
    std::string buf = "chat-v1";
    field(buf, "S", req.system_prompt);
    field(buf, "N", std::to_string(req.user_messages.size()));
    for (const auto& m : req.user_messages) field(buf, "U", m);
    field(buf, "T", format_double(req.temperature));
    field(buf, "M", std::to_string(req.max_tokens));
    field(buf, "I", std::to_string(req.image_refs.size()));
    for (const auto& i : req.image_refs) field(buf, "R", i);
    field(buf, "G", req.stage);
    field(buf, "D", req.sample_id);
    return sha256_hex(buf);
}

std::shared_ptr<ScriptedMockProvider> ScriptedMockProvider::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open script " + path.string());
    std::map<Key, std::string> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("stage") || !j.contains("sample") ||
            !j.contains("response") || !j.at("response").is_string()) {
            fail(ErrorKind::MalformedRecord, path.string() + " line " + std::to_string(line_no));
        }
        entries[{j.at("stage").get<std::string>(), j.at("sample").get<std::string>()}] =
            j.at("response").get<std::string>();
    }
    return std::make_shared<ScriptedMockProvider>(std::move(entries));
}

ChatResponse ScriptedMockProvider::complete(const ChatRequest& req) {
    const auto it = entries_.find({req.stage, req.sample_id});
    if (it == entries_.end()) fail(ErrorKind::ScriptMissing, "(" + req.stage + ", " + req.sample_id + ")");
    return {it->second, {{"provider", "scripted"}}};
}

RemoteProvider::RemoteProvider(RemoteEndpoint endpoint, std::shared_ptr<HttpClient> client, bool send_images)
    : endpoint_(std::move(endpoint)), client_(std::move(client)), send_images_(send_images) {}

namespace {

std::string image_url(const std::string& ref) {
    if (ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0 || ref.rfind("data:", 0) == 0) return ref;
    std::string bytes;
    if (!read_file(ref, bytes)) fail(ErrorKind::ImageUnreadable, ref);
    const auto ext = std::filesystem::path(ref).extension().string();
    const std::string mime = ext == ".png" ? "image/png" : ext == ".webp" ? "image/webp" : "image/jpeg";
    return "data:" + mime + ";base64," + base64_encode(bytes);
}

}  // namespace

json RemoteProvider::build_body(const ChatRequest& req) const {
    json messages = json::array();
    messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
    for (std::size_t i = 0; i < req.user_messages.size(); ++i) {
        const bool attach = send_images_ && i == 0 && !req.image_refs.empty();
        if (!attach) {
            messages.push_back({{"role", "user"}, {"content", req.user_messages[i]}});
            continue;
        }
        json parts = json::array({{{"type", "text"}, {"text", req.user_messages[i]}}});
        for (const auto& ref : req.image_refs) {
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url(ref)}}}});
        }
        messages.push_back({{"role", "user"}, {"content", parts}});
    }
    return {{"model", endpoint_.model},
            {"messages", messages},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

ChatResponse RemoteProvider::complete(const ChatRequest& req) {
    if (!client_) fail(ErrorKind::ProviderUnavailable, "no HTTP client configured");
    HttpHeaders headers;
    if (!endpoint_.credential_env.empty()) {
        const char* key = std::getenv(endpoint_.credential_env.c_str());
        if (key == nullptr || *key == '\0') {
            fail(ErrorKind::InvalidConfig, "credential variable " + endpoint_.credential_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto reply = post_json(*client_, endpoint_.endpoint, build_body(req), headers);
    try {
        const auto& message = reply.at("choices").at(0).at("message");
        ChatResponse r{message.at("content").get<std::string>(), json::object()};
        r.provider_meta["model"] = reply.value("model", endpoint_.model);
        if (reply.contains("usage")) r.provider_meta["usage"] = reply.at("usage");
        return r;
    } catch (const json::exception& e) {
        fail(ErrorKind::ProviderUnavailable, "unexpected completion payload: " + std::string(e.what()));
    }
}

void GatewayConfig::validate() const {
    if (retry.max_attempts < 1) fail(ErrorKind::InvalidConfig, "retry.max_attempts must be >= 1");
    if (max_in_flight < 1) fail(ErrorKind::InvalidConfig, "max_in_flight must be >= 1");
    if (const auto* r = std::get_if<RemoteEndpoint>(&provider); r && r->endpoint.empty()) {
        fail(ErrorKind::InvalidConfig, "remote chat provider needs an endpoint");
    }
}

LlmGateway::LlmGateway(std::shared_ptr<ChatProvider> provider, RetryPolicy retry,
                       std::optional<std::filesystem::path> cache_dir, std::size_t max_in_flight)
    : provider_(std::move(provider)),
      retry_(retry),
      cache_dir_(std::move(cache_dir)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, max_in_flight))) {
    if (!provider_) fail(ErrorKind::InvalidConfig, "gateway needs a provider");
    if (retry_.max_attempts < 1) fail(ErrorKind::InvalidConfig, "retry.max_attempts must be >= 1");
    if (cache_dir_) std::filesystem::create_directories(*cache_dir_);
}

std::optional<std::string> LlmGateway::cache_get(const std::string& digest) const {
    if (!cache_dir_) return std::nullopt;
    std::string text;
    if (!read_file((*cache_dir_ / (digest + ".txt")).string(), text)) return std::nullopt;
    return text;
}

void LlmGateway::cache_put(const std::string& digest, const std::string& text) const {
    if (!cache_dir_) return;
    const auto final_path = *cache_dir_ / (digest + ".txt");
    // Unique temp name per writer, then rename: readers see whole files only.
    thread_local std::mt19937_64 rng{std::random_device{}()};
    const auto tmp = *cache_dir_ / (digest + ".tmp" + std::to_string(rng()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write cache entry " + tmp.string());
        out << text;
        if (!out.flush()) fail(ErrorKind::Io, "cannot write cache entry " + tmp.string());
    }
    std::filesystem::rename(tmp, final_path);
}

ChatResponse LlmGateway::call_with_retry(const ChatRequest& req) {
    if (!provider_->is_remote()) {
        ++provider_calls_;
        return provider_->complete(req);
    }
    for (int attempt = 1;; ++attempt) {
        try {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            ++provider_calls_;
            return provider_->complete(req);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ProviderUnavailable) throw;
            if (attempt >= retry_.max_attempts) {
                fail(ErrorKind::ProviderExhausted,
                     std::to_string(attempt) + " attempts failed; last: " + e.detail());
            }
        }
        std::this_thread::sleep_for(retry_.backoff_base * (1LL << (attempt - 1)));
    }
}

ChatResponse LlmGateway::complete(const ChatRequest& req) {
    req.validate();
    const auto digest = request_digest(req);
    if (auto cached = cache_get(digest)) {
        ++cache_hits_;
        return {std::move(*cached), {{"cache", "hit"}, {"digest", digest}}};
    }
    auto response = call_with_retry(req);
    cache_put(digest, response.text);
    response.provider_meta["digest"] = digest;
    return response;
}

std::shared_ptr<ChatProvider> make_provider(const GatewayConfig& cfg, std::shared_ptr<HttpClient> client) {
    if (const auto* remote = std::get_if<RemoteEndpoint>(&cfg.provider)) {
        if (!client) client = make_http_client();
        return std::make_shared<RemoteProvider>(*remote, std::move(client), cfg.send_images);
    }
    if (const auto* scripted = std::get_if<ScriptedSpec>(&cfg.provider)) {
        return ScriptedMockProvider::from_file(scripted->script);
    }
    return std::make_shared<agents::RuleMockProvider>();
}

std::shared_ptr<LlmGateway> make_gateway(const GatewayConfig& cfg, std::shared_ptr<HttpClient> client) {
    cfg.validate();
    return std::make_shared<LlmGateway>(make_provider(cfg, std::move(client)), cfg.retry, cfg.cache_dir,
                                        cfg.max_in_flight);
}

}  // namespace exclaim::llm

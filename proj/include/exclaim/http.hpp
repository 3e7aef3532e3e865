#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

namespace exclaim {

// Endpoint of an external model service (detector, NER, aligner, encoder, LLM).
struct RemoteService {
    std::string endpoint;
    bool operator==(const RemoteService&) const = default;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

// Minimal POST transport. Implementations must be safe for concurrent calls.
// A transport failure (connection refused, timeout) is reported by throwing
// Error{ProviderUnavailable}; non-2xx statuses are returned to the caller.
class HttpClient {
public:
    virtual ~HttpClient() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const HttpHeaders& headers) = 0;
};

std::shared_ptr<HttpClient> make_http_client(
    std::chrono::milliseconds timeout = std::chrono::seconds(60));

// POSTs a JSON body and parses a JSON reply. Non-2xx statuses, transport
// failures and unparseable bodies all raise ProviderUnavailable.
nlohmann::json post_json(HttpClient& client, const std::string& url,
                         const nlohmann::json& body, const HttpHeaders& headers = {});

// Splits "http://host:port/path" into the scheme-host-port part and the path.
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace exclaim

#include "exclaim/http.hpp"

#include <httplib.h>

#include "exclaim/error.hpp"

namespace exclaim {

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        fail(ErrorKind::InvalidConfig, "endpoint is not an absolute URL: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

namespace {

class HttplibClient final : public HttpClient {
public:
    explicit HttplibClient(std::chrono::milliseconds timeout) : timeout_(timeout) {}

    HttpResponse post(const std::string& url, const std::string& body,
                      const HttpHeaders& headers) override {
        const auto [base, path] = split_url(url);
        httplib::Client client(base);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_write_timeout(timeout_);
        httplib::Headers h(headers.begin(), headers.end());
        auto result = client.Post(path, h, body, "application/json");
        if (!result) {
            fail(ErrorKind::ProviderUnavailable,
                 url + ": " + httplib::to_string(result.error()));
        }
        return {result->status, result->body};
    }

private:
    std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<HttpClient> make_http_client(std::chrono::milliseconds timeout) {
    return std::make_shared<HttplibClient>(timeout);
}

nlohmann::json post_json(HttpClient& client, const std::string& url,
                         const nlohmann::json& body, const HttpHeaders& headers) {
    const auto response = client.post(url, body.dump(), headers);
    if (response.status < 200 || response.status >= 300) {
        fail(ErrorKind::ProviderUnavailable,
             url + " returned HTTP " + std::to_string(response.status));
    }
    auto parsed = nlohmann::json::parse(response.body, nullptr, false);
    if (parsed.is_discarded()) {
        fail(ErrorKind::ProviderUnavailable, url + " returned a non-JSON body");
    }
    return parsed;
}

}  // namespace exclaim

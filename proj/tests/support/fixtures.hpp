#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "exclaim/corpus.hpp"
#include "exclaim/evaluation.hpp"
#include "exclaim/http.hpp"
#include "exclaim/llm_gateway.hpp"

namespace exclaim::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Programmable HTTP transport that records every request.
class FakeHttpClient final : public HttpClient {
public:
    using Handler = std::function<HttpResponse(const std::string& url, const std::string& body)>;
    explicit FakeHttpClient(Handler handler) : handler_(std::move(handler)) {}

    HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) override;

    std::size_t calls() const noexcept { return calls_.load(); }
    std::vector<std::string> bodies() const;
    std::vector<HttpHeaders> headers() const;

private:
    Handler handler_;
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mutex_;
    std::vector<std::string> bodies_;
    std::vector<HttpHeaders> headers_;
};

// A transport whose every request fails as if the host were unreachable.
std::shared_ptr<FakeHttpClient> down_client();
HttpResponse json_reply(const nlohmann::json& body, int status = 200);

TextualEntity span_of(const std::string& caption, const std::string& surface, const std::string& id,
                      const std::string& ner = "ENT");
VisualEntity visual(const std::string& id, const std::string& label, double confidence = 0.9);

corpus::NewsItem make_item(const std::string& id, const std::string& caption,
                           std::optional<corpus::Label> label = std::nullopt,
                           std::optional<corpus::Category> category = std::nullopt);

// Synthetic newsroom corpus: captions "<person> <event> in <place>." with a
// sidecar of aligned visual/textual entities. Labels alternate, categories cycle.
std::vector<corpus::NewsItem> newsroom_corpus(std::size_t n);

// The pope / Ciudad Juarez case: the query item first, then one related
// report from the same event and unrelated stories.
std::vector<corpus::NewsItem> ciudad_juarez_corpus();
inline constexpr const char* k_case_id = "cj-query";

// Scripted stage responses for the case study item.
std::map<llm::ScriptedMockProvider::Key, std::string> case_study_script();

// Retrieval, detective and analyst responses for every item; the analyst
// answers OOC for falsified items.
std::map<llm::ScriptedMockProvider::Key, std::string> newsroom_script(const std::vector<corpus::NewsItem>& items);
void write_script(const std::filesystem::path& path, const std::map<llm::ScriptedMockProvider::Key, std::string>& s);

// 3,632 falsified and 3,632 pristine predictions with 243 missed and 287
// false alarms; the 530 errors fall 177/174/106/73 into text-image,
// person, scene and text-text categories.
std::vector<evaluation::PredictionRecord> synthetic_predictions();
// The same construction as news items plus analyst-only scripted verdicts.
std::vector<corpus::NewsItem> synthetic_corpus();
std::map<llm::ScriptedMockProvider::Key, std::string> synthetic_script(const std::vector<corpus::NewsItem>& items,
                                                                       const std::vector<evaluation::PredictionRecord>& preds);

std::string read_text(const std::filesystem::path& path);

}  // namespace exclaim::testing

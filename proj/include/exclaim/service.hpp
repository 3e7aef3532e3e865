#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exclaim/agents.hpp"
#include "exclaim/evaluation.hpp"

namespace exclaim::service {

enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobState s) noexcept;

struct DetectionJob {
    std::string job_id;
    nlohmann::json request;
    JobState state = JobState::Queued;
    std::optional<nlohmann::json> result;    // Verdict, present iff Done
    std::optional<nlohmann::json> evidence;  // EvidenceSet when retrieval ran
    std::string error;                       // set iff Failed
};

nlohmann::json to_json(const DetectionJob& job);

// Candidate explanations for the blinded ranking study.
struct RankStudy {
    std::vector<std::string> methods;
    struct Sample {
        std::string sample_id;
        std::string caption;
        std::string image_ref;
        std::map<std::string, std::string> explanations;  // method -> text
    };
    std::vector<Sample> samples;

    // {"methods": [...], "samples": [{"sample_id", "caption", "image_ref",
    //   "explanations": {method: text}}]}
    static RankStudy from_json(const nlohmann::json& j);
};

struct RankingSubmission {
    std::string judge_id;
    std::string sample_id;
    std::map<std::string, int> ranks;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

struct ServiceOptions {
    std::filesystem::path data_dir;  // holds the append-only record log
    std::size_t workers = 1;
    agents::PipelineConfig pipeline;
};

// Request handling for the detection and rank-study API, independent of the
// HTTP transport. Jobs and submissions are appended to <data_dir>/records.log
// and replayed on construction; jobs that were still queued or running when
// the log ends are marked failed.
class Service {
public:
    Service(std::shared_ptr<const agents::DetectionPipeline> pipeline, RankStudy study, ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ApiResponse post_detect(const nlohmann::json& body);
    ApiResponse get_job(const std::string& id) const;
    ApiResponse get_trace(const std::string& id) const;
    ApiResponse get_evidence(const std::string& id) const;
    ApiResponse get_samples() const;
    // `header_judge` is used when the body has no judge_id.
    ApiResponse post_submission(const nlohmann::json& body, const std::string& header_judge = {});
    ApiResponse get_report() const;

    // Blocks until no job is queued or running.
    void wait_idle();

private:
    void worker_loop(std::stop_token stop);
    void run_job(const std::string& id);
    void append(const nlohmann::json& record);
    void replay();
    evaluation::RankMatrix matrix() const;

    std::shared_ptr<const agents::DetectionPipeline> pipeline_;
    RankStudy study_;
    ServiceOptions options_;

    mutable std::mutex mutex_;
    std::condition_variable_any work_cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, DetectionJob> jobs_;
    std::deque<std::string> queue_;
    std::size_t running_ = 0;
    std::size_t next_job_ = 1;
    std::vector<RankingSubmission> submissions_;
    std::set<std::pair<std::string, std::string>> submitted_;

    std::mutex log_mutex_;
    std::ofstream log_;
    std::vector<std::jthread> workers_;
};

// HTTP binding of Service (cpp-httplib). Bodies are JSON.
class HttpFrontend {
public:
    explicit HttpFrontend(Service& service);
    ~HttpFrontend();

    // Binds to an ephemeral port and returns it; serve with listen_after_bind().
    int bind_to_any_port(const std::string& host);
    bool bind(const std::string& host, int port);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace exclaim::service

#include "exclaim/service.hpp"

#include <httplib.h>

#include "exclaim/digest.hpp"
#include "exclaim/error.hpp"

namespace exclaim::service {

using nlohmann::json;

std::string_view to_string(JobState s) noexcept {
    switch (s) {
        case JobState::Queued: return "queued";
        case JobState::Running: return "running";
        case JobState::Done: return "done";
        case JobState::Failed: return "failed";
    }
    return "";
}

namespace {

std::optional<JobState> parse_state(std::string_view s) {
    for (auto st : {JobState::Queued, JobState::Running, JobState::Done, JobState::Failed}) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

ApiResponse error_response(int status, std::string_view kind, const std::string& message) {
    return {status, {{"error", kind}, {"message", message}}};
}

ApiResponse not_found(const std::string& what) { return error_response(404, "NotFound", what); }

}  // namespace

json to_json(const DetectionJob& job) {
    json j = {{"job_id", job.job_id}, {"state", to_string(job.state)}, {"request", job.request}};
    j["result"] = job.result ? *job.result : json(nullptr);
    if (job.state == JobState::Failed) j["error"] = job.error;
    return j;
}

RankStudy RankStudy::from_json(const json& j) {
    RankStudy study;
    try {
        study.methods = j.at("methods").get<std::vector<std::string>>();
        for (const auto& s : j.at("samples")) {
            Sample sample;
            sample.sample_id = s.at("sample_id").get<std::string>();
            sample.caption = s.value("caption", "");
            sample.image_ref = s.value("image_ref", "");
            sample.explanations = s.at("explanations").get<std::map<std::string, std::string>>();
            for (const auto& m : study.methods) {
                if (!sample.explanations.contains(m)) {
                    fail(ErrorKind::MalformedRecord, "sample '" + sample.sample_id + "' lacks method '" + m + "'");
                }
            }
            study.samples.push_back(std::move(sample));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedRecord, std::string("rank study: ") + e.what());
    }
    if (study.methods.empty()) fail(ErrorKind::MalformedRecord, "rank study has no methods");
    return study;
}

Service::Service(std::shared_ptr<const agents::DetectionPipeline> pipeline, RankStudy study, ServiceOptions options)
    : pipeline_(std::move(pipeline)), study_(std::move(study)), options_(std::move(options)) {
    if (options_.data_dir.empty()) fail(ErrorKind::InvalidConfig, "service needs a data directory");
    std::filesystem::create_directories(options_.data_dir / "uploads");
    replay();
    const auto log_path = options_.data_dir / "records.log";
    bool torn_tail = false;
    if (std::ifstream tail(log_path, std::ios::binary | std::ios::ate); tail && tail.tellg() > 0) {
        tail.seekg(-1, std::ios::end);
        torn_tail = tail.get() != '\n';
    }
    log_.open(log_path, std::ios::app);
    if (!log_) fail(ErrorKind::Io, "cannot open record log in " + options_.data_dir.string());
    // Terminate a partial last line so new records are not glued to it.
    if (torn_tail) log_ << '\n' << std::flush;
    for (auto& [id, job] : jobs_) {
        if (job.state == JobState::Queued || job.state == JobState::Running) {
            job.state = JobState::Failed;
            job.error = "interrupted by restart";
            append({{"type", "job_state"}, {"job_id", id}, {"state", "failed"}, {"error", job.error}});
        }
    }
    for (std::size_t i = 0; i < std::max<std::size_t>(1, options_.workers); ++i) {
        workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
    }
}

Service::~Service() {
    for (auto& w : workers_) w.request_stop();
    work_cv_.notify_all();
    workers_.clear();
}

void Service::append(const json& record) {
    std::lock_guard lock(log_mutex_);
    log_ << record.dump() << '\n';
    log_.flush();
}

void Service::replay() {
    std::ifstream in(options_.data_dir / "records.log");
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
        const auto r = json::parse(line, nullptr, false);
        // A torn final line from a crash is skipped.
        if (r.is_discarded() || !r.is_object()) continue;
        const auto type = r.value("type", "");
        if (type == "job_created") {
            DetectionJob job;
            job.job_id = r.at("job_id").get<std::string>();
            job.request = r.at("request");
            jobs_[job.job_id] = job;
            const auto n = std::stoull(job.job_id.substr(job.job_id.find('-') + 1));
            next_job_ = std::max<std::size_t>(next_job_, n + 1);
        } else if (type == "job_state") {
            const auto it = jobs_.find(r.at("job_id").get<std::string>());
            if (it == jobs_.end()) continue;
            if (const auto st = parse_state(r.value("state", ""))) it->second.state = *st;
            if (r.contains("result")) it->second.result = r.at("result");
            if (r.contains("evidence")) it->second.evidence = r.at("evidence");
            if (r.contains("error")) it->second.error = r.at("error").get<std::string>();
        } else if (type == "submission") {
            RankingSubmission s{r.at("judge_id").get<std::string>(), r.at("sample_id").get<std::string>(),
                                r.at("ranks").get<std::map<std::string, int>>()};
            submitted_.insert({s.judge_id, s.sample_id});
            submissions_.push_back(std::move(s));
        }
    }
}

ApiResponse Service::post_detect(const json& body) {
    if (!pipeline_) return error_response(503, "ServiceUnavailable", "no detection pipeline is configured");
    if (!body.is_object()) return error_response(400, "MalformedRecord", "body must be a JSON object");
    if (!body.contains("caption") || !body.at("caption").is_string() ||
        corpus::trim(body.at("caption").get<std::string>()).empty()) {
        return error_response(400, "MalformedRecord", "caption is required");
    }

    std::string job_id;
    {
        std::lock_guard lock(mutex_);
        job_id = "job-" + std::to_string(next_job_++);
    }

    json request = body;
    if (body.contains("image_b64")) {
        if (!body.at("image_b64").is_string()) return error_response(400, "MalformedRecord", "image_b64 must be a string");
        const auto bytes = base64_decode(body.at("image_b64").get<std::string>());
        if (!bytes) return error_response(400, "MalformedRecord", "image_b64 is not valid base64");
        auto ext = std::filesystem::path(body.value("image_name", "upload.jpg")).extension().string();
        if (ext.empty()) ext = ".jpg";
        const auto path = options_.data_dir / "uploads" / (job_id + ext);
        std::ofstream out(path, std::ios::binary);
        out << *bytes;
        if (!out.flush()) return error_response(500, "Io", "cannot store upload");
        request.erase("image_b64");
        request["image_ref"] = path.string();
    }
    if (!request.contains("image_ref")) request["image_ref"] = "";
    if (!request.contains("id")) request["id"] = job_id;
    try {
        (void)corpus::item_from_json(request);
    } catch (const Error& e) {
        return error_response(400, to_string(e.kind()), e.detail());
    }

    DetectionJob job{job_id, request, JobState::Queued, std::nullopt, std::nullopt, {}};
    append({{"type", "job_created"}, {"job_id", job_id}, {"request", request}});
    {
        std::lock_guard lock(mutex_);
        jobs_[job_id] = job;
        queue_.push_back(job_id);
    }
    work_cv_.notify_one();
    return {202, {{"job_id", job_id}, {"state", "queued"}}};
}

void Service::worker_loop(std::stop_token stop) {
    while (true) {
        std::string id;
        {
            std::unique_lock lock(mutex_);
            if (!work_cv_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
            id = queue_.front();
            queue_.pop_front();
            ++running_;
            jobs_[id].state = JobState::Running;
        }
        append({{"type", "job_state"}, {"job_id", id}, {"state", "running"}});
        run_job(id);
        {
            std::lock_guard lock(mutex_);
            --running_;
        }
        idle_cv_.notify_all();
    }
}

void Service::run_job(const std::string& id) {
    json request;
    {
        std::lock_guard lock(mutex_);
        request = jobs_.at(id).request;
    }
    json record = {{"type", "job_state"}, {"job_id", id}};
    JobState final_state = JobState::Failed;
    std::optional<json> result, evidence;
    std::string error;
    try {
        const auto item = corpus::item_from_json(request);
        auto out = pipeline_->run(item, options_.pipeline);
        result = agents::to_json(out.verdict);
        (*result)["item_id"] = item.id;
        if (out.evidence) evidence = retrieval::to_json(*out.evidence);
        final_state = JobState::Done;
    } catch (const std::exception& e) {
        error = e.what();
    }
    record["state"] = to_string(final_state);
    if (result) record["result"] = *result;
    if (evidence) record["evidence"] = *evidence;
    if (!error.empty()) record["error"] = error;
    append(record);

    std::lock_guard lock(mutex_);
    auto& job = jobs_.at(id);
    job.result = std::move(result);
    job.evidence = std::move(evidence);
    job.error = std::move(error);
    job.state = final_state;
}

void Service::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && running_ == 0; });
}

ApiResponse Service::get_job(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return not_found("job " + id);
    return {200, to_json(it->second)};
}

ApiResponse Service::get_trace(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return not_found("job " + id);
    const auto& job = it->second;
    json trace = json::array();
    if (job.result && job.result->contains("trace")) trace = job.result->at("trace");
    return {200, {{"job_id", id}, {"state", to_string(job.state)}, {"trace", trace}}};
}

ApiResponse Service::get_evidence(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return not_found("job " + id);
    const auto& job = it->second;
    return {200, {{"job_id", id}, {"state", to_string(job.state)}, {"evidence", job.evidence ? *job.evidence : json(nullptr)}}};
}

ApiResponse Service::get_samples() const {
    json samples = json::array();
    for (const auto& s : study_.samples) {
        json explanations = json::array();
        for (const auto& m : study_.methods) explanations.push_back({{"method", m}, {"text", s.explanations.at(m)}});
        samples.push_back({{"sample_id", s.sample_id},
                           {"caption", s.caption},
                           {"image_ref", s.image_ref},
                           {"explanations", explanations}});
    }
    return {200, {{"methods", study_.methods}, {"samples", samples}}};
}

ApiResponse Service::post_submission(const json& body, const std::string& header_judge) {
    if (!body.is_object()) return error_response(400, "MalformedRecord", "body must be a JSON object");
    RankingSubmission s;
    try {
        s.judge_id = body.contains("judge_id") ? body.at("judge_id").get<std::string>() : header_judge;
        s.sample_id = body.at("sample_id").get<std::string>();
        s.ranks = body.at("ranks").get<std::map<std::string, int>>();
    } catch (const json::exception& e) {
        return error_response(400, "MalformedRecord", e.what());
    }
    if (s.judge_id.empty()) return error_response(400, "MalformedRecord", "judge_id is required");
    const bool known_sample = std::any_of(study_.samples.begin(), study_.samples.end(),
                                          [&](const auto& x) { return x.sample_id == s.sample_id; });
    if (!known_sample) return not_found("sample " + s.sample_id);

    std::vector<int> ranks;
    for (const auto& m : study_.methods) {
        const auto it = s.ranks.find(m);
        if (it == s.ranks.end()) break;
        ranks.push_back(it->second);
    }
    if (s.ranks.size() != study_.methods.size() || ranks.size() != study_.methods.size() ||
        !evaluation::is_permutation_of_1_to_m(ranks)) {
        return error_response(400, "NotAPermutation",
                              "ranks must assign 1.." + std::to_string(study_.methods.size()) +
                                  " to the study's methods exactly once");
    }
    {
        std::lock_guard lock(mutex_);
        if (!submitted_.insert({s.judge_id, s.sample_id}).second) {
            return error_response(409, "DuplicateSubmission",
                                  "judge '" + s.judge_id + "' already ranked sample '" + s.sample_id + "'");
        }
        submissions_.push_back(s);
    }
    append({{"type", "submission"}, {"judge_id", s.judge_id}, {"sample_id", s.sample_id}, {"ranks", s.ranks}});
    return {201, {{"accepted", true}, {"judge_id", s.judge_id}, {"sample_id", s.sample_id}}};
}

evaluation::RankMatrix Service::matrix() const {
    evaluation::RankMatrix m;
    m.methods = study_.methods;
    std::lock_guard lock(mutex_);
    for (const auto& s : submissions_) {
        evaluation::RankMatrix::Row row{s.judge_id, s.sample_id, {}};
        for (const auto& method : study_.methods) row.ranks.push_back(s.ranks.at(method));
        m.rows.push_back(std::move(row));
    }
    return m;
}

ApiResponse Service::get_report() const {
    const auto report = evaluation::average_ranks(matrix());
    return {200, evaluation::to_json(report)};
}

struct HttpFrontend::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {
        const auto reply = [](httplib::Response& res, const ApiResponse& api) {
            res.status = api.status;
            res.set_content(api.body.dump(), "application/json");
        };
        const auto parse_body = [](const httplib::Request& req, json& out) {
            out = json::parse(req.body, nullptr, false);
            return !out.is_discarded();
        };
        server.Post("/detect", [=, this](const httplib::Request& req, httplib::Response& res) {
            json body;
            if (!parse_body(req, body)) return reply(res, error_response(400, "MalformedRecord", "body is not JSON"));
            reply(res, service.post_detect(body));
        });
        server.Get(R"(/jobs/([^/]+))", [=, this](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.get_job(req.matches[1]));
        });
        server.Get(R"(/jobs/([^/]+)/trace)", [=, this](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.get_trace(req.matches[1]));
        });
        server.Get(R"(/jobs/([^/]+)/evidence)", [=, this](const httplib::Request& req, httplib::Response& res) {
            reply(res, service.get_evidence(req.matches[1]));
        });
        server.Get("/rank-study/samples", [=, this](const httplib::Request&, httplib::Response& res) {
            reply(res, service.get_samples());
        });
        server.Post("/rank-study/submissions", [=, this](const httplib::Request& req, httplib::Response& res) {
            json body;
            if (!parse_body(req, body)) return reply(res, error_response(400, "MalformedRecord", "body is not JSON"));
            reply(res, service.post_submission(body, req.get_header_value("X-Judge-Id")));
        });
        server.Get("/rank-study/report", [=, this](const httplib::Request&, httplib::Response& res) {
            reply(res, service.get_report());
        });
        server.Get("/health", [=](const httplib::Request&, httplib::Response& res) {
            reply(res, {200, {{"status", "ok"}}});
        });
        server.set_exception_handler([=](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                reply(res, error_response(500, to_string(e.kind()), e.detail()));
            } catch (const std::exception& e) {
                reply(res, error_response(500, "Internal", e.what()));
            }
        });
    }
};

HttpFrontend::HttpFrontend(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpFrontend::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
bool HttpFrontend::listen_after_bind() { return impl_->server.listen_after_bind(); }
void HttpFrontend::stop() {
    if (impl_) impl_->server.stop();
}
void HttpFrontend::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace exclaim::service

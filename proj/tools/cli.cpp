#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "exclaim/config.hpp"
#include "exclaim/corpus.hpp"
#include "exclaim/database.hpp"
#include "exclaim/error.hpp"
#include "exclaim/evaluation.hpp"
#include "exclaim/service.hpp"

namespace exclaim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by every subcommand that runs the engine.
struct Common {
    std::string config;
    std::size_t jobs = 1;
    std::string cache_dir;
    std::optional<double> tau;
    std::optional<std::size_t> k;
    std::string provider;
    std::string out;
};

void add_common(CLI::App& sub, Common& c) {
    sub.add_option("--config", c.config, "Configuration file")->check(CLI::ExistingFile);
    sub.add_option("--jobs", c.jobs, "Items processed concurrently")->check(CLI::PositiveNumber);
    sub.add_option("--cache-dir", c.cache_dir, "LLM response cache directory");
    sub.add_option("--tau", c.tau, "Alignment threshold in [0,1]");
    sub.add_option("--k", c.k, "Evidence items per modality");
    sub.add_option("--provider", c.provider, "rule | scripted:<file> | remote");
}

config::AppConfig resolve_config(const Common& c) {
    config::AppConfig cfg = c.config.empty() ? config::AppConfig{} : config::load_config(c.config);
    if (c.tau) cfg.engine.alignment.threshold = *c.tau;
    if (c.k) cfg.engine.retrieval.k = *c.k;
    if (!c.cache_dir.empty()) cfg.gateway.cache_dir = fs::path(c.cache_dir);
    if (!c.provider.empty()) {
        if (c.provider == "rule") {
            cfg.gateway.provider = llm::RuleSpec{};
        } else if (c.provider.rfind("scripted:", 0) == 0) {
            cfg.gateway.provider = llm::ScriptedSpec{c.provider.substr(9)};
        } else if (c.provider == "remote") {
            if (!std::holds_alternative<llm::RemoteEndpoint>(cfg.gateway.provider)) {
                cfg.gateway.provider = llm::RemoteEndpoint{};
            }
        } else {
            fail(ErrorKind::InvalidConfig, "unknown provider '" + c.provider + "'");
        }
    }
    cfg.engine.validate();
    cfg.gateway.validate();
    return cfg;
}

std::shared_ptr<HttpClient> client_for(const Environment& env) {
    return env.client ? env.client : make_http_client();
}

std::shared_ptr<agents::DetectionPipeline> make_pipeline(const config::AppConfig& cfg, const std::string& index_dir,
                                                         const Environment& env) {
    std::shared_ptr<const retrieval::EvidenceDatabase> db;
    if (!index_dir.empty()) {
        db = std::make_shared<retrieval::EvidenceDatabase>(database::load_database(index_dir));
    }
    auto client = client_for(env);
    return std::make_shared<agents::DetectionPipeline>(cfg.engine, db, llm::make_gateway(cfg.gateway, client),
                                                       cfg.agents, client);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out.flush()) fail(ErrorKind::Io, "cannot write " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string render_verdict(const std::string& item_id, const agents::Verdict& v) {
    std::ostringstream out;
    out << "ITEM: " << item_id << '\n';
    out << "CONFIG: " << v.config_used.label() << '\n';
    out << "EXPLANATION:\n" << v.explanation << '\n';
    out << "VERDICT: " << (v.c_ooc ? "OOC" : "PRISTINE") << '\n';
    return out.str();
}

std::vector<corpus::NewsItem> load_eval_items(const std::string& path) {
    auto corpus = corpus::load_corpus(path);
    for (const auto& item : corpus.items) {
        const auto problems = corpus::validate_item(item, corpus::ValidationMode::Eval);
        if (!problems.empty()) fail(ErrorKind::MalformedRecord, "item '" + item.id + "': " + problems.front());
    }
    return std::move(corpus.items);
}

evaluation::Runner runner_for(const agents::DetectionPipeline& pipeline) {
    return [&pipeline](const corpus::NewsItem& item, const agents::PipelineConfig& cfg) {
        return pipeline.run(item, cfg).verdict.c_ooc;
    };
}

std::atomic<service::HttpFrontend*> g_frontend{nullptr};

extern "C" void on_signal(int) {
    if (auto* f = g_frontend.load()) f->stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env) {
    CLI::App app{"Out-of-context image-caption detection", "exclaim"};
    app.require_subcommand(1);

    Common common;

    std::string ingest_corpus;
    auto* ingest = app.add_subcommand("ingest", "Validate a corpus and print its summary");
    ingest->add_option("corpus", ingest_corpus, "Line-delimited corpus")->required();
    ingest->add_option("--out", common.out, "Write the summary to this file");

    std::string build_corpus;
    auto* build = app.add_subcommand("build-index", "Build the visual, textual and event indices");
    build->add_option("corpus", build_corpus, "Line-delimited corpus")->required();
    add_common(*build, common);
    build->add_option("--out", common.out, "Output directory")->required();

    std::string index_dir, detect_corpus, item_id, caption, image_ref;
    auto* detect = app.add_subcommand("detect", "Judge one image-caption pair");
    add_common(*detect, common);
    detect->add_option("--index", index_dir, "Directory with the three index files");
    auto* by_corpus = detect->add_option("--corpus", detect_corpus, "Corpus holding the item");
    auto* by_id = detect->add_option("--item", item_id, "Item id within --corpus");
    auto* by_caption = detect->add_option("--caption", caption, "Caption to judge");
    detect->add_option("--image", image_ref, "Image reference for --caption");
    by_corpus->needs(by_id);
    by_id->needs(by_corpus);
    by_caption->excludes(by_corpus);
    detect->add_option("--out", common.out, "Write the verdict record (JSON) to this file");

    std::string eval_corpus;
    auto* evaluate = app.add_subcommand("evaluate", "Score the pipeline on a labeled corpus");
    evaluate->add_option("corpus", eval_corpus, "Labeled corpus")->required();
    add_common(*evaluate, common);
    evaluate->add_option("--index", index_dir, "Directory with the three index files");
    evaluate->add_option("--out", common.out, "Output directory")->required();

    std::string ablate_corpus;
    auto* ablate = app.add_subcommand("ablate", "Run the six agent/evidence configurations");
    ablate->add_option("corpus", ablate_corpus, "Labeled corpus")->required();
    add_common(*ablate, common);
    ablate->add_option("--index", index_dir, "Directory with the three index files");
    ablate->add_option("--out", common.out, "Output directory")->required();

    std::string matrix_path;
    auto* rank = app.add_subcommand("rank-report", "Mean ranks from a judge ranking matrix");
    rank->add_option("matrix", matrix_path, "Rank matrix file")->required()->check(CLI::ExistingFile);
    rank->add_option("--out", common.out, "Write the report (JSON) to this file");

    std::string bind_addr = "127.0.0.1:8080", study_path, data_dir = "exclaim-data";
    std::size_t workers = 1;
    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    add_common(*serve, common);
    serve->add_option("--bind", bind_addr, "host:port");
    serve->add_option("--index", index_dir, "Directory with the three index files");
    serve->add_option("--study", study_path, "Rank-study samples file")->check(CLI::ExistingFile);
    serve->add_option("--data-dir", data_dir, "Directory for the record log and uploads");
    serve->add_option("--workers", workers, "Concurrent detection jobs")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return k_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return k_ok;
    } catch (const CLI::ParseError& e) {
        // Subcommand help is also signalled through ParseError.
        if (e.get_exit_code() == 0) {
            for (auto* sub : app.get_subcommands()) out << sub->help();
            if (app.get_subcommands().empty()) out << app.help();
            return k_ok;
        }
        err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return k_usage_error;
    }

    try {
        if (ingest->parsed()) {
            const auto corpus = corpus::load_corpus(ingest_corpus);
            const auto text = dump(corpus::to_json(corpus.manifest));
            if (!common.out.empty()) write_text(common.out, text);
            out << text;
        } else if (build->parsed()) {
            const auto cfg = resolve_config(common);
            const auto corpus = corpus::load_corpus(build_corpus);
            auto client = client_for(env);
            const auto result = database::build_database(corpus.items, cfg.engine, client.get());
            const fs::path dir = common.out;
            database::save_database(result.db, dir);
            const auto text = dump(database::to_json(result.report));
            write_text(dir / "build_report.json", text);
            out << text;
        } else if (detect->parsed()) {
            if (detect_corpus.empty() && caption.empty()) {
                err << json{{"error", "usage"}, {"message", "detect needs --corpus with --item, or --caption"}}.dump()
                    << '\n';
                return k_usage_error;
            }
            const auto cfg = resolve_config(common);
            corpus::NewsItem item;
            if (!detect_corpus.empty()) {
                const auto corpus = corpus::load_corpus(detect_corpus);
                const auto it = std::find_if(corpus.items.begin(), corpus.items.end(),
                                             [&](const auto& x) { return x.id == item_id; });
                if (it == corpus.items.end()) fail(ErrorKind::PreconditionFailed, "no item '" + item_id + "' in corpus");
                item = *it;
            } else {
                item = corpus::item_from_json({{"id", "query"}, {"image_ref", image_ref}, {"caption", caption}});
            }
            const auto pipeline = make_pipeline(cfg, index_dir, env);
            const auto result = pipeline->run(item, cfg.pipeline);
            if (!common.out.empty()) {
                json record = agents::to_json(result.verdict);
                record["item_id"] = item.id;
                if (result.evidence) record["evidence"] = retrieval::to_json(*result.evidence);
                write_text(common.out, dump(record));
            }
            out << render_verdict(item.id, result.verdict);
        } else if (evaluate->parsed()) {
            const auto cfg = resolve_config(common);
            const auto items = load_eval_items(eval_corpus);
            const auto pipeline = make_pipeline(cfg, index_dir, env);
            const agents::PipelineConfig configs[] = {cfg.pipeline};
            const auto results = evaluation::ablation_sweep(items, configs, runner_for(*pipeline), common.jobs);
            const auto& preds = results.front().predictions;
            const auto report = evaluation::accuracy_report(preds);
            const auto errors = evaluation::error_distribution(preds);

            const fs::path dir = common.out;
            std::string lines;
            for (const auto& p : preds) lines += evaluation::to_json(p).dump() + "\n";
            write_text(dir / "predictions.jsonl", lines);
            write_text(dir / "eval_report.json", dump(evaluation::to_json(report)));
            write_text(dir / "eval_report.txt", evaluation::format_table(report));
            write_text(dir / "error_distribution.json", dump(evaluation::to_json(errors)));
            write_text(dir / "error_distribution.txt", evaluation::format_table(errors));
            out << evaluation::format_table(report) << '\n' << evaluation::format_table(errors);
        } else if (ablate->parsed()) {
            const auto cfg = resolve_config(common);
            const auto items = load_eval_items(ablate_corpus);
            const auto pipeline = make_pipeline(cfg, index_dir, env);
            const auto rows = agents::ablation_rows();
            const auto results = evaluation::ablation_sweep(items, rows, runner_for(*pipeline), common.jobs);

            json j = json::array();
            for (const auto& r : results) {
                j.push_back({{"config", agents::to_json(r.config)},
                             {"label", r.config.label()},
                             {"report", evaluation::to_json(r.report)}});
            }
            const fs::path dir = common.out;
            write_text(dir / "ablation.json", dump(j));
            write_text(dir / "ablation.txt", evaluation::format_ablation_table(results));
            out << evaluation::format_ablation_table(results);
        } else if (rank->parsed()) {
            std::ifstream in(matrix_path);
            const auto j = json::parse(in, nullptr, false);
            if (j.is_discarded()) fail(ErrorKind::MalformedRecord, matrix_path + " is not valid JSON");
            const auto report = evaluation::average_ranks(evaluation::rank_matrix_from_json(j));
            if (!common.out.empty()) write_text(common.out, dump(evaluation::to_json(report)));
            out << evaluation::format_table(report);
        } else if (serve->parsed()) {
            const auto cfg = resolve_config(common);
            const auto colon = bind_addr.rfind(':');
            if (colon == std::string::npos) {
                err << json{{"error", "usage"}, {"message", "--bind expects host:port"}}.dump() << '\n';
                return k_usage_error;
            }
            const auto host = bind_addr.substr(0, colon);
            int port = 0;
            try {
                port = std::stoi(bind_addr.substr(colon + 1));
            } catch (const std::exception&) {
                err << json{{"error", "usage"}, {"message", "--bind expects host:port"}}.dump() << '\n';
                return k_usage_error;
            }
            service::RankStudy study;
            if (!study_path.empty()) {
                std::ifstream in(study_path);
                const auto j = json::parse(in, nullptr, false);
                if (j.is_discarded()) fail(ErrorKind::MalformedRecord, study_path + " is not valid JSON");
                study = service::RankStudy::from_json(j);
            }
            service::ServiceOptions options{data_dir, workers, cfg.pipeline};
            service::Service svc(make_pipeline(cfg, index_dir, env), std::move(study), options);
            service::HttpFrontend frontend(svc);
            if (!frontend.bind(host, port)) fail(ErrorKind::Io, "cannot bind " + bind_addr);
            g_frontend = &frontend;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            out << "listening on " << bind_addr << std::endl;
            frontend.listen_after_bind();
            g_frontend = nullptr;
        }
    } catch (const Error& e) {
        err << json{{"error", to_string(e.kind())}, {"message", e.detail()}}.dump() << '\n';
        return k_runtime_error;
    } catch (const std::exception& e) {
        err << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return k_runtime_error;
    }
    return k_ok;
}

}  // namespace exclaim::cli

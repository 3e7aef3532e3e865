#include "exclaim/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "exclaim/builtin_prompts.hpp"
#include "exclaim/digest.hpp"
#include "exclaim/error.hpp"

namespace exclaim::agents {

using nlohmann::json;

std::string PipelineConfig::label() const {
    std::string agents = "analyst";
    if (use_detective_agent) agents += "+detective";
    if (use_retrieval_agent) agents += "+retrieval";
    std::string evidence;
    if (use_event_evidence) evidence = "event";
    if (use_entity_evidence) evidence += evidence.empty() ? "entity" : "+entity";
    return agents + "/" + (evidence.empty() ? "none" : evidence);
}

json to_json(const PipelineConfig& cfg) {
    return {{"analyst_agent", true},
            {"detective_agent", cfg.use_detective_agent},
            {"retrieval_agent", cfg.use_retrieval_agent},
            {"event_evidence", cfg.use_event_evidence},
            {"entity_evidence", cfg.use_entity_evidence}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorKind::InvalidConfig, "pipeline config must be an object");
    static const std::vector<std::string> known = {"analyst_agent", "detective_agent", "retrieval_agent",
                                                   "event_evidence", "entity_evidence"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            fail(ErrorKind::InvalidConfig, "unknown pipeline key '" + key + "'");
        }
        if (!value.is_boolean()) fail(ErrorKind::InvalidConfig, "pipeline key '" + key + "' must be boolean");
    }
    if (j.contains("analyst_agent") && !j.at("analyst_agent").get<bool>()) {
        fail(ErrorKind::InvalidConfig, "the analyst agent cannot be disabled");
    }
    PipelineConfig cfg;
    cfg.use_detective_agent = j.value("detective_agent", true);
    cfg.use_retrieval_agent = j.value("retrieval_agent", true);
    cfg.use_event_evidence = j.value("event_evidence", true);
    cfg.use_entity_evidence = j.value("entity_evidence", true);
    return cfg;
}

std::vector<PipelineConfig> ablation_rows() {
    //       retrieval detective event  entity
    return {
        {false, false, false, false},
        {false, false, true, true},
        {false, true, true, true},
        {true, false, true, true},
        {true, true, true, false},
        {true, true, true, true},
    };
}

std::string_view to_string(ElementStatus s) noexcept {
    switch (s) {
        case ElementStatus::Consistent: return "consistent";
        case ElementStatus::Contradicted: return "contradicted";
        case ElementStatus::Unknown: return "unknown";
    }
    return "unknown";
}

bool DetectiveFindings::any_contradicted() const {
    return std::any_of(element_checks.begin(), element_checks.end(),
                       [](const auto& kv) { return kv.second.status == ElementStatus::Contradicted; });
}

json to_json(const StageRecord& r) {
    json calls = json::array();
    for (const auto& c : r.calls) calls.push_back({{"prompt_digest", c.prompt_digest}, {"response", c.response}});
    return {{"stage", r.stage}, {"calls", calls}, {"parsed", r.parsed}};
}

json to_json(const Verdict& v) {
    json trace = json::array();
    for (const auto& r : v.trace) trace.push_back(to_json(r));
    return {{"c_ooc", v.c_ooc}, {"explanation", v.explanation}, {"trace", trace}, {"config", to_json(v.config_used)}};
}

PromptTemplates PromptTemplates::builtin() {
    return {std::string(builtin_prompts::k_version),        std::string(builtin_prompts::k_system),
            std::string(builtin_prompts::k_retrieval),      std::string(builtin_prompts::k_detective),
            std::string(builtin_prompts::k_analyst),        std::string(builtin_prompts::k_analyst_repair)};
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t;
    t.version = dir.filename().string();
    const std::pair<const char*, std::string*> files[] = {{"system.txt", &t.system},
                                                          {"retrieval.txt", &t.retrieval},
                                                          {"detective.txt", &t.detective},
                                                          {"analyst.txt", &t.analyst},
                                                          {"analyst_repair.txt", &t.analyst_repair}};
    for (const auto& [name, target] : files) {
        if (!read_file((dir / name).string(), *target)) {
            fail(ErrorKind::InvalidConfig, "missing prompt template " + (dir / name).string());
        }
    }
    return t;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const auto open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        const auto close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        const std::string name(tmpl.substr(open + 2, close - open - 2));
        if (const auto it = values.find(name); it != values.end()) {
            out.append(it->second);
        } else {
            out.append(tmpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

namespace {

std::string one_line(std::string_view text) {
    std::string s(text);
    std::replace_if(s.begin(), s.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
    return s;
}

std::string trim_copy(std::string_view s) { return corpus::trim(s); }

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void render_hits(std::ostringstream& out, index::Granularity g, const std::vector<index::Hit>& hits) {
    for (const auto& h : hits) {
        char dist[32];
        std::snprintf(dist, sizeof dist, "%.4f", h.distance);
        out << '[' << index::to_string(g) << "] source=" << h.source_news_id << " dist=" << dist
            << " :: " << one_line(h.payload) << '\n';
    }
}

}  // namespace

std::string render_evidence(const retrieval::EvidenceSet& evidence, const PipelineConfig& cfg) {
    if (!evidence.verified) fail(ErrorKind::UnverifiedEvidence, "evidence must pass verify() before rendering");
    std::ostringstream out;
    if (cfg.use_entity_evidence) {
        render_hits(out, index::Granularity::Visual, evidence.visual_hits);
        render_hits(out, index::Granularity::Textual, evidence.textual_hits);
    }
    if (cfg.use_event_evidence) render_hits(out, index::Granularity::Event, evidence.event_hits);
    return out.str();
}

RetrievalFindings parse_retrieval_response(const std::string& text) {
    RetrievalFindings f;
    f.stage_raw = text;
    bool in_flags = false;
    for (const auto& raw : split_lines(text)) {
        const auto line = trim_copy(raw);
        if (!in_flags) {
            if (lower(line) == "flags:") in_flags = true;
            continue;
        }
        if (line.size() >= 2 && (line[0] == '-' || line[0] == '*') && line[1] == ' ') {
            const auto flag = trim_copy(std::string_view(line).substr(2));
            if (!flag.empty()) f.flagged_inconsistencies.push_back(flag);
        } else if (!line.empty()) {
            break;
        }
    }
    return f;
}

namespace {

std::optional<ElementStatus> parse_status(std::string_view word) {
    const auto w = lower(word);
    if (w == "consistent") return ElementStatus::Consistent;
    if (w == "contradicted") return ElementStatus::Contradicted;
    if (w == "unknown") return ElementStatus::Unknown;
    return std::nullopt;
}

// Strips a leading separator: U+2014, "--", "-" or ":".
std::string strip_separator(std::string_view rest) {
    auto s = trim_copy(rest);
    std::string_view v(s);
    if (v.rfind("\xE2\x80\x94", 0) == 0) {
        v.remove_prefix(3);
    } else if (v.rfind("--", 0) == 0) {
        v.remove_prefix(2);
    } else if (!v.empty() && (v[0] == '-' || v[0] == ':')) {
        v.remove_prefix(1);
    }
    return trim_copy(v);
}

}  // namespace

DetectiveFindings parse_detective_response(const std::string& text) {
    DetectiveFindings f;
    f.stage_raw = text;
    for (auto e : k_elements) f.element_checks[std::string(e)] = {};
    for (const auto& raw : split_lines(text)) {
        auto line = trim_copy(raw);
        if (lower(line.substr(0, 8)) != "element ") continue;
        const auto colon = line.find(':', 8);
        if (colon == std::string::npos) continue;
        const auto name = lower(trim_copy(std::string_view(line).substr(8, colon - 8)));
        if (!f.element_checks.contains(name)) continue;
        const auto rest = trim_copy(std::string_view(line).substr(colon + 1));
        std::size_t word_end = 0;
        while (word_end < rest.size() && std::isalpha(static_cast<unsigned char>(rest[word_end]))) ++word_end;
        const auto status = parse_status(std::string_view(rest).substr(0, word_end));
        if (!status) continue;
        f.element_checks[name] = {*status, strip_separator(std::string_view(rest).substr(word_end))};
    }
    return f;
}

std::optional<ParsedVerdict> parse_verdict(const std::string& text) {
    auto lines = split_lines(text);
    while (!lines.empty() && trim_copy(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) return std::nullopt;

    std::string last = trim_copy(lines.back());
    last.erase(std::remove_if(last.begin(), last.end(), [](char c) { return c == '*' || c == '`'; }), last.end());
    last = trim_copy(last);
    const auto l = lower(last);
    if (l.rfind("verdict:", 0) != 0) return std::nullopt;
    const auto value = trim_copy(std::string_view(l).substr(8));
    ParsedVerdict v;
    if (value == "ooc") {
        v.c_ooc = 1;
    } else if (value == "pristine") {
        v.c_ooc = 0;
    } else {
        return std::nullopt;
    }
    lines.pop_back();
    std::string body;
    for (const auto& line : lines) {
        body += line;
        body += '\n';
    }
    v.explanation = trim_copy(body);
    return v;
}

std::string render_retrieval_findings(const RetrievalFindings& f) {
    std::string out = "RETRIEVAL FLAGS:\n";
    for (const auto& flag : f.flagged_inconsistencies) out += "- " + one_line(flag) + "\n";
    return out;
}

std::string render_detective_findings(const DetectiveFindings& f) {
    std::string out = "DETECTIVE CHECKS:\n";
    for (auto e : k_elements) {
        const auto& check = f.element_checks.at(std::string(e));
        out += "ELEMENT " + std::string(e) + ": " + std::string(to_string(check.status));
        if (!check.note.empty()) out += " - " + one_line(check.note);
        out += "\n";
    }
    return out;
}

namespace {

std::map<std::string, std::string> placeholders(const StageContext& ctx, std::string prior) {
    return {{"caption", one_line(ctx.item.caption)},
            {"image_note", ctx.image_note},
            {"evidence", ctx.evidence_text.empty() ? "(no evidence provided)" : ctx.evidence_text},
            {"prior_findings", prior.empty() ? "(none)" : std::move(prior)}};
}

llm::ChatRequest make_request(const StageContext& ctx, std::string stage, std::vector<std::string> messages) {
    llm::ChatRequest req;
    req.system_prompt = ctx.settings.prompts.system;
    req.user_messages = std::move(messages);
    req.temperature = ctx.settings.temperature;
    req.max_tokens = ctx.settings.max_tokens;
    if (ctx.settings.send_images && !ctx.item.image_ref.empty()) req.image_refs = {ctx.item.image_ref};
    req.stage = std::move(stage);
    req.sample_id = ctx.item.id;
    return req;
}

StageCall call(const StageContext& ctx, const llm::ChatRequest& req) {
    return {llm::request_digest(req), ctx.gateway.complete(req).text};
}

json findings_json(const RetrievalFindings& f) { return {{"flags", f.flagged_inconsistencies}}; }

json findings_json(const DetectiveFindings& f) {
    json checks = json::object();
    for (const auto& [name, check] : f.element_checks) {
        checks[name] = {{"status", to_string(check.status)}, {"note", check.note}};
    }
    return {{"elements", checks}};
}

}  // namespace

RetrievalFindings run_retrieval_agent(const StageContext& ctx, StageRecord* record) {
    const auto prompt = fill_template(ctx.settings.prompts.retrieval, placeholders(ctx, {}));
    const auto c = call(ctx, make_request(ctx, "retrieval", {prompt}));
    auto findings = parse_retrieval_response(c.response);
    if (record) *record = {"retrieval", {c}, findings_json(findings)};
    return findings;
}

DetectiveFindings run_detective_agent(const StageContext& ctx, const RetrievalFindings* prior, StageRecord* record) {
    const auto prompt =
        fill_template(ctx.settings.prompts.detective, placeholders(ctx, prior ? render_retrieval_findings(*prior) : ""));
    const auto c = call(ctx, make_request(ctx, "detective", {prompt}));
    auto findings = parse_detective_response(c.response);
    if (record) *record = {"detective", {c}, findings_json(findings)};
    return findings;
}

Verdict run_analyst_agent(const StageContext& ctx, const RetrievalFindings* retrieval_prior,
                          const DetectiveFindings* detective_prior) {
    std::string prior;
    if (retrieval_prior) prior += render_retrieval_findings(*retrieval_prior);
    if (detective_prior) prior += render_detective_findings(*detective_prior);
    const auto prompt = fill_template(ctx.settings.prompts.analyst, placeholders(ctx, prior));

    StageRecord record{"analyst", {}, json::object()};
    record.calls.push_back(call(ctx, make_request(ctx, "analyst", {prompt})));
    auto parsed = parse_verdict(record.calls.back().response);
    if (!parsed) {
        const auto repair = fill_template(ctx.settings.prompts.analyst_repair,
                                          {{"previous_response", record.calls.back().response}});
        record.calls.push_back(call(ctx, make_request(ctx, "analyst_repair", {prompt, repair})));
        parsed = parse_verdict(record.calls.back().response);
        if (!parsed) {
            fail(ErrorKind::UnparseableVerdict, "analyst answer for '" + ctx.item.id + "' has no verdict line");
        }
    }
    if (parsed->explanation.empty()) {
        parsed->explanation = std::string("The analyst gave the verdict ") + (parsed->c_ooc ? "OOC" : "PRISTINE") +
                              " without further explanation.";
    }
    record.parsed = {{"c_ooc", parsed->c_ooc}, {"repaired", record.calls.size() > 1}};

    Verdict v;
    v.c_ooc = parsed->c_ooc;
    v.explanation = parsed->explanation;
    v.trace.push_back(std::move(record));
    return v;
}

DetectionPipeline::DetectionPipeline(retrieval::EngineConfig engine,
                                     std::shared_ptr<const retrieval::EvidenceDatabase> db,
                                     std::shared_ptr<llm::LlmGateway> gateway, AgentSettings settings,
                                     std::shared_ptr<HttpClient> client)
    : engine_(std::move(engine)),
      db_(std::move(db)),
      gateway_(std::move(gateway)),
      settings_(std::move(settings)),
      client_(std::move(client)) {
    if (!gateway_) fail(ErrorKind::InvalidConfig, "pipeline needs a gateway");
    engine_.validate();
}

PipelineResult DetectionPipeline::run(const corpus::NewsItem& item, const PipelineConfig& cfg) const {
    if (corpus::trim(item.caption).empty()) fail(ErrorKind::PreconditionFailed, "empty caption for " + item.id);

    PipelineResult result;
    std::string image_note = "image_ref=" + item.image_ref;
    std::string evidence_text;
    if (cfg.any_evidence()) {
        if (!db_) fail(ErrorKind::PreconditionFailed, "evidence requested but no evidence database is loaded");
        const auto analysis = retrieval::analyze_item(item, engine_, client_.get());
        if (!analysis.visuals.empty()) {
            image_note += "; detected objects:";
            for (std::size_t i = 0; i < analysis.visuals.size(); ++i) {
                image_note += (i ? ", " : " ") + analysis.visuals[i].class_label;
            }
        }
        auto retrieved = retrieval::retrieve(retrieval::to_queries(analysis), *db_, engine_.retrieval, item.id);
        auto evidence = retrieval::verify(retrieval::aggregate(std::move(retrieved)));
        evidence_text = render_evidence(evidence, cfg);
        result.evidence = std::move(evidence);
    }

    const StageContext ctx{item, image_note, evidence_text, *gateway_, settings_};
    std::vector<StageRecord> trace;
    std::optional<RetrievalFindings> retrieval_findings;
    std::optional<DetectiveFindings> detective_findings;
    if (cfg.use_retrieval_agent) {
        trace.emplace_back();
        retrieval_findings = run_retrieval_agent(ctx, &trace.back());
    }
    if (cfg.use_detective_agent) {
        trace.emplace_back();
        detective_findings =
            run_detective_agent(ctx, retrieval_findings ? &*retrieval_findings : nullptr, &trace.back());
    }
    auto verdict = run_analyst_agent(ctx, retrieval_findings ? &*retrieval_findings : nullptr,
                                     detective_findings ? &*detective_findings : nullptr);
    trace.push_back(std::move(verdict.trace.front()));
    verdict.trace = std::move(trace);
    verdict.config_used = cfg;
    result.verdict = std::move(verdict);
    return result;
}

}  // namespace exclaim::agents

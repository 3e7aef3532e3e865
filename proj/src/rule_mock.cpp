#include "exclaim/rule_mock.hpp"

#include <cstdio>
#include <sstream>
#include <vector>

#include "exclaim/alignment.hpp"
#include "exclaim/corpus.hpp"

namespace exclaim::agents {

double caption_token_overlap(std::string_view caption, std::string_view payload) {
    const auto cap = alignment::lowercase_tokens(caption);
    if (cap.empty()) return 0.0;
    const auto pay = alignment::lowercase_tokens(payload);
    std::size_t shared = 0;
    for (const auto& t : cap) shared += pay.count(t);
    return static_cast<double>(shared) / static_cast<double>(cap.size());
}

namespace {

struct EventLine {
    std::string source;
    std::string payload;
};

struct PromptView {
    std::string stage;
    std::string caption;
    std::vector<EventLine> events;
    bool has_retrieval_section = false;
    std::vector<std::string> retrieval_flags;
    bool has_detective_section = false;
    bool any_contradicted = false;
};

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

PromptView read_prompt(std::string_view prompt) {
    PromptView v;
    std::istringstream in{std::string(prompt)};
    std::string raw;
    enum class Section { None, RetrievalFlags, DetectiveChecks } section = Section::None;
    bool in_priors = false;
    while (std::getline(in, raw)) {
        const auto line = corpus::trim(raw);
        if (starts_with(line, "STAGE:")) {
            v.stage = corpus::trim(std::string_view(line).substr(6));
            in_priors = false;
            section = Section::None;
            // A repair request carries the analyst prompt first; its findings still apply.
            if (v.stage != "analyst_repair") {
                v.has_retrieval_section = v.has_detective_section = v.any_contradicted = false;
                v.retrieval_flags.clear();
                v.events.clear();
            }
        } else if (starts_with(line, "CAPTION:")) {
            v.caption = corpus::trim(std::string_view(line).substr(8));
        } else if (starts_with(line, "[event] ")) {
            const auto src = line.find("source=");
            const auto sep = line.find(" :: ");
            if (src != std::string::npos && sep != std::string::npos) {
                const auto src_end = line.find(' ', src);
                v.events.push_back({line.substr(src + 7, src_end - src - 7), line.substr(sep + 4)});
            }
        } else if (line == "PRIOR FINDINGS:") {
            in_priors = true;
        } else if (in_priors && line == "RETRIEVAL FLAGS:") {
            section = Section::RetrievalFlags;
            v.has_retrieval_section = true;
        } else if (in_priors && line == "DETECTIVE CHECKS:") {
            section = Section::DetectiveChecks;
            v.has_detective_section = true;
        } else if (section == Section::RetrievalFlags && starts_with(line, "- ")) {
            v.retrieval_flags.push_back(line.substr(2));
        } else if (section == Section::DetectiveChecks && starts_with(line, "ELEMENT ")) {
            const auto colon = line.find(':');
            if (colon != std::string::npos && starts_with(corpus::trim(line.substr(colon + 1)), "contradicted")) {
                v.any_contradicted = true;
            }
        } else if (line.empty() || (!starts_with(line, "- ") && !starts_with(line, "ELEMENT "))) {
            section = Section::None;
        }
    }
    return v;
}

std::string percent(double x) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.0f%%", x * 100.0);
    return buf;
}

std::vector<std::string> low_overlap_flags(const PromptView& v) {
    std::vector<std::string> flags;
    for (const auto& e : v.events) {
        const double overlap = caption_token_overlap(v.caption, e.payload);
        if (overlap < k_low_overlap_threshold) {
            flags.push_back("low event overlap: source=" + e.source + " shares " + percent(overlap) +
                            " of the caption tokens");
        }
    }
    return flags;
}

std::string respond_retrieval(const PromptView& v) {
    std::string out = "Compared the caption with " + std::to_string(v.events.size()) + " event evidence item(s).\nFLAGS:\n";
    for (const auto& f : low_overlap_flags(v)) out += "- " + f + "\n";
    return out;
}

std::string respond_detective(const PromptView& v) {
    const bool flagged = !v.retrieval_flags.empty();
    std::string out;
    for (const char* element : {"time", "place", "person"}) {
        out += std::string("ELEMENT ") + element + ": unknown - not assessed by the rule mock\n";
    }
    out += flagged ? "ELEMENT event: contradicted - retrieval flagged " + std::to_string(v.retrieval_flags.size()) +
                         " inconsistency(ies)\n"
                   : "ELEMENT event: consistent - no retrieval flags\n";
    out += "ELEMENT object: unknown - not assessed by the rule mock\n";
    return out;
}

std::string respond_analyst(const PromptView& v) {
    bool ooc = false;
    std::string reason;
    if (v.has_detective_section) {
        ooc = v.any_contradicted;
        reason = ooc ? "The detective stage found a contradicted element." : "No element was contradicted.";
    } else if (v.has_retrieval_section) {
        ooc = !v.retrieval_flags.empty();
        reason = ooc ? "The retrieval stage flagged " + std::to_string(v.retrieval_flags.size()) + " inconsistency(ies)."
                     : "The retrieval stage flagged nothing.";
    } else {
        const auto flags = low_overlap_flags(v);
        ooc = !flags.empty();
        reason = ooc ? "Event evidence disagrees with the caption (" + flags.front() + ")."
                     : "No evidence contradicts the caption.";
    }
    return "Rule-based review. " + reason + "\nVERDICT: " + (ooc ? "OOC" : "PRISTINE") + "\n";
}

}  // namespace

std::string rule_mock_respond(std::string_view prompt) {
    const auto v = read_prompt(prompt);
    if (v.stage == "retrieval") return respond_retrieval(v);
    if (v.stage == "detective") return respond_detective(v);
    return respond_analyst(v);
}

llm::ChatResponse RuleMockProvider::complete(const llm::ChatRequest& req) {
    std::string prompt = req.system_prompt;
    for (const auto& m : req.user_messages) {
        prompt += '\n';
        prompt += m;
    }
    return {rule_mock_respond(prompt), {{"provider", "rule"}}};
}

}  // namespace exclaim::agents

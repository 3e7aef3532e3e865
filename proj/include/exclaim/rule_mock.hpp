#pragma once

#include <string>
#include <string_view>

#include "exclaim/llm_gateway.hpp"

namespace exclaim::agents {

// Offline stand-in for the chat model, a pure function of the prompt text.
//
// The stage is read from the "STAGE: <name>" line. Event evidence lines
// ("[event] source=<id> ... :: <payload>") are scored by token overlap:
// |tokens(caption) & tokens(payload)| / |tokens(caption)| on lowercase
// alphanumeric tokens.
//   retrieval: one "low event overlap" flag per event line with overlap < 0.30.
//   detective: event is contradicted when the prior findings carry a retrieval
//              flag, consistent otherwise; the other four elements are unknown.
//   analyst:   OOC iff a detective element is contradicted; without detective
//              findings, iff a retrieval flag exists; without either, iff an
//              event line has overlap < 0.30.
//   analyst_repair: restates the analyst rule.
std::string rule_mock_respond(std::string_view prompt);

inline constexpr double k_low_overlap_threshold = 0.30;

double caption_token_overlap(std::string_view caption, std::string_view payload);

class RuleMockProvider final : public llm::ChatProvider {
public:
    llm::ChatResponse complete(const llm::ChatRequest& req) override;
    std::string name() const override { return "rule"; }
};

}  // namespace exclaim::agents

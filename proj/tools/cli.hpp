#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "exclaim/http.hpp"

namespace exclaim::cli {

enum ExitCode : int { k_ok = 0, k_runtime_error = 1, k_usage_error = 2 };

struct Environment {
    // Transport for remote providers; a real HTTP client when null.
    std::shared_ptr<HttpClient> client;
};

// Runs one invocation. `args` excludes the program name. Errors are reported
// on `err` as a single JSON line {"error": kind, "message": text}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Environment& env = {});

}  // namespace exclaim::cli

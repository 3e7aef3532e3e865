#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "exclaim/agents.hpp"
#include "exclaim/corpus.hpp"

namespace exclaim::evaluation {

// An exact ratio of counts. Display rounding is half-up on the rational value,
// so 530/7264 never drifts through floating point.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    // 100 * num / den rounded half-up to `decimals` places, as text.
    std::string percent(int decimals) const;
    bool operator==(const Ratio&) const = default;
};

// Rounds num/den half-up to `decimals` places and prints it.
std::string format_fixed(std::uint64_t num, std::uint64_t den, int decimals);

struct PredictionRecord {
    std::string item_id;
    corpus::Label truth = corpus::Label::Pristine;
    int predicted_c_ooc = 0;
    std::optional<corpus::Category> category;
    agents::PipelineConfig config_used;

    bool correct() const noexcept { return (truth == corpus::Label::Falsified) == (predicted_c_ooc == 1); }
};

nlohmann::json to_json(const PredictionRecord& p);

struct EvalReport {
    std::size_t total = 0;
    std::size_t falsified = 0;
    std::size_t pristine = 0;
    // Confusion matrix with Falsified as the positive class.
    std::size_t true_ooc = 0;        // falsified, predicted 1
    std::size_t missed_ooc = 0;      // falsified, predicted 0
    std::size_t false_alarm = 0;     // pristine, predicted 1
    std::size_t true_pristine = 0;   // pristine, predicted 0

    Ratio acc_all() const { return {true_ooc + true_pristine, total}; }
    // Absent when the class has no samples.
    std::optional<Ratio> acc_falsified() const;
    std::optional<Ratio> acc_pristine() const;
    std::size_t errors() const noexcept { return missed_ooc + false_alarm; }
};

// Throws EmptyInput for no predictions.
EvalReport accuracy_report(std::span<const PredictionRecord> preds);
nlohmann::json to_json(const EvalReport& r);
std::string format_table(const EvalReport& r);

struct ErrorDistribution {
    std::size_t total_errors = 0;
    std::map<corpus::Category, std::size_t> counts;  // categories with at least one error

    Ratio rate(corpus::Category c) const;
};

// Throws MissingCategory when a misclassified record lacks a category.
ErrorDistribution error_distribution(std::span<const PredictionRecord> preds);
nlohmann::json to_json(const ErrorDistribution& d);
std::string format_table(const ErrorDistribution& d);

// Judges' strict orderings of M candidate explanations, one row per
// (judge, sample).
struct RankMatrix {
    std::vector<std::string> methods;
    struct Row {
        std::string judge;
        std::string sample;
        std::vector<int> ranks;  // ranks[m] is method m's rank in 1..M
    };
    std::vector<Row> rows;

    // Throws NotAPermutation(judge, sample) on the first invalid row.
    void validate() const;
};

bool is_permutation_of_1_to_m(std::span<const int> ranks);

struct RankReport {
    std::vector<std::string> methods;
    std::vector<std::uint64_t> rank_totals;
    std::uint64_t cells = 0;

    double mean(std::size_t m) const;
    std::vector<double> means() const;
    // Exact check that the means sum to M(M+1)/2.
    bool rank_sum_holds() const;
};

RankReport average_ranks(const RankMatrix& m);
nlohmann::json to_json(const RankReport& r);
std::string format_table(const RankReport& r);

// {"methods": [...], "rankings": [{"judge", "sample", "ranks": {method: rank}}]}
RankMatrix rank_matrix_from_json(const nlohmann::json& j);

using Runner = std::function<int(const corpus::NewsItem&, const agents::PipelineConfig&)>;

struct AblationResult {
    agents::PipelineConfig config;
    EvalReport report;
    std::vector<PredictionRecord> predictions;
};

// Runs every config over every item. `jobs` > 1 evaluates items concurrently;
// results do not depend on it.
std::vector<AblationResult> ablation_sweep(std::span<const corpus::NewsItem> items,
                                           std::span<const agents::PipelineConfig> configs, const Runner& runner,
                                           std::size_t jobs = 1);

std::string format_ablation_table(std::span<const AblationResult> results);

// Applies `fn` to indices [0, n) on up to `jobs` threads; rethrows the first
// exception after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace exclaim::evaluation

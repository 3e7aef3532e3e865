#include "exclaim/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "exclaim/error.hpp"

namespace exclaim::evaluation {

using nlohmann::json;

namespace {
__extension__ using u128 = unsigned __int128;
}

std::string format_fixed(std::uint64_t num, std::uint64_t den, int decimals) {
    if (den == 0) fail(ErrorKind::PreconditionFailed, "zero denominator");
    std::uint64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    // floor(num * scale / den + 1/2) computed in integers.
    const u128 scaled = (static_cast<u128>(num) * scale * 2 + den) / (2 * static_cast<u128>(den));
    const auto whole = static_cast<std::uint64_t>(scaled / scale);
    const auto frac = static_cast<std::uint64_t>(scaled % scale);
    std::ostringstream out;
    out << whole;
    if (decimals > 0) out << '.' << std::setw(decimals) << std::setfill('0') << frac;
    return out.str();
}

std::string Ratio::percent(int decimals) const { return format_fixed(num * 100, den, decimals); }

json to_json(const PredictionRecord& p) {
    json j = {{"item_id", p.item_id},
              {"truth", corpus::to_string(p.truth)},
              {"predicted_c_ooc", p.predicted_c_ooc},
              {"correct", p.correct()},
              {"config", agents::to_json(p.config_used)}};
    j["category"] = p.category ? json(corpus::to_string(*p.category)) : json(nullptr);
    return j;
}

std::optional<Ratio> EvalReport::acc_falsified() const {
    if (falsified == 0) return std::nullopt;
    return Ratio{true_ooc, falsified};
}

std::optional<Ratio> EvalReport::acc_pristine() const {
    if (pristine == 0) return std::nullopt;
    return Ratio{true_pristine, pristine};
}

EvalReport accuracy_report(std::span<const PredictionRecord> preds) {
    if (preds.empty()) fail(ErrorKind::EmptyInput, "no predictions to score");
    EvalReport r;
    for (const auto& p : preds) {
        if (p.predicted_c_ooc != 0 && p.predicted_c_ooc != 1) {
            fail(ErrorKind::PreconditionFailed, "prediction for '" + p.item_id + "' is not 0/1");
        }
        ++r.total;
        if (p.truth == corpus::Label::Falsified) {
            ++r.falsified;
            ++(p.predicted_c_ooc == 1 ? r.true_ooc : r.missed_ooc);
        } else {
            ++r.pristine;
            ++(p.predicted_c_ooc == 0 ? r.true_pristine : r.false_alarm);
        }
    }
    return r;
}

namespace {

json ratio_json(const std::optional<Ratio>& r) {
    if (!r) return nullptr;
    return {{"correct", r->num}, {"total", r->den}, {"ratio", r->value()}, {"percent", r->percent(1)}};
}

std::string cell(const std::optional<Ratio>& r) { return r ? r->percent(1) : "-"; }

}  // namespace

json to_json(const EvalReport& r) {
    return {{"total", r.total},
            {"falsified", r.falsified},
            {"pristine", r.pristine},
            {"confusion",
             {{"true_ooc", r.true_ooc},
              {"missed_ooc", r.missed_ooc},
              {"false_alarm", r.false_alarm},
              {"true_pristine", r.true_pristine}}},
            {"acc_all", ratio_json(r.acc_all())},
            {"acc_falsified", ratio_json(r.acc_falsified())},
            {"acc_pristine", ratio_json(r.acc_pristine())}};
}

std::string format_table(const EvalReport& r) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "Split" << std::right << std::setw(10) << "Accuracy" << std::setw(10)
        << "Correct" << std::setw(10) << "Total" << '\n';
    const auto row = [&](const char* name, const std::optional<Ratio>& ratio) {
        out << std::left << std::setw(12) << name << std::right << std::setw(10) << cell(ratio) << std::setw(10)
            << (ratio ? std::to_string(ratio->num) : "-") << std::setw(10) << (ratio ? std::to_string(ratio->den) : "-")
            << '\n';
    };
    row("All", r.acc_all());
    row("Falsified", r.acc_falsified());
    row("Pristine", r.acc_pristine());
    return out.str();
}

Ratio ErrorDistribution::rate(corpus::Category c) const {
    const auto it = counts.find(c);
    return {it == counts.end() ? 0 : it->second, total_errors == 0 ? 1 : total_errors};
}

ErrorDistribution error_distribution(std::span<const PredictionRecord> preds) {
    ErrorDistribution d;
    for (const auto& p : preds) {
        if (p.correct()) continue;
        if (!p.category) fail(ErrorKind::MissingCategory, "misclassified item '" + p.item_id + "' has no category");
        ++d.counts[*p.category];
        ++d.total_errors;
    }
    return d;
}

json to_json(const ErrorDistribution& d) {
    json cats = json::array();
    for (const auto& [c, n] : d.counts) {
        cats.push_back({{"category", corpus::to_string(c)}, {"errors", n}, {"rate_percent", d.rate(c).percent(2)}});
    }
    return {{"total_errors", d.total_errors}, {"categories", cats}};
}

std::string format_table(const ErrorDistribution& d) {
    std::vector<std::pair<corpus::Category, std::size_t>> rows(d.counts.begin(), d.counts.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::ostringstream out;
    out << std::left << std::setw(18) << "Category" << std::right << std::setw(12) << "Errors" << std::setw(12)
        << "Rate (%)" << '\n';
    for (const auto& [c, n] : rows) {
        out << std::left << std::setw(18) << corpus::display_name(c) << std::right << std::setw(12) << n
            << std::setw(12) << d.rate(c).percent(2) << '\n';
    }
    std::uint64_t rounded_sum_hundredths = 0;
    for (const auto& [c, n] : rows) {
        const auto s = d.rate(c).percent(2);
        const auto dot = s.find('.');
        rounded_sum_hundredths += std::stoull(s.substr(0, dot)) * 100 + std::stoull(s.substr(dot + 1));
    }
    out << std::left << std::setw(18) << "Total" << std::right << std::setw(12) << d.total_errors << std::setw(12)
        << (d.total_errors ? format_fixed(rounded_sum_hundredths, 100, 2) : "-") << '\n';
    return out.str();
}

bool is_permutation_of_1_to_m(std::span<const int> ranks) {
    std::vector<bool> seen(ranks.size() + 1, false);
    for (int r : ranks) {
        if (r < 1 || static_cast<std::size_t>(r) > ranks.size() || seen[static_cast<std::size_t>(r)]) return false;
        seen[static_cast<std::size_t>(r)] = true;
    }
    return true;
}

void RankMatrix::validate() const {
    if (methods.empty()) fail(ErrorKind::PreconditionFailed, "rank matrix has no methods");
    for (const auto& row : rows) {
        if (row.ranks.size() != methods.size() || !is_permutation_of_1_to_m(row.ranks)) {
            fail(ErrorKind::NotAPermutation, "(" + row.judge + ", " + row.sample + ")");
        }
    }
}

double RankReport::mean(std::size_t m) const {
    return cells == 0 ? 0.0 : static_cast<double>(rank_totals.at(m)) / static_cast<double>(cells);
}

std::vector<double> RankReport::means() const {
    std::vector<double> out;
    for (std::size_t m = 0; m < rank_totals.size(); ++m) out.push_back(mean(m));
    return out;
}

bool RankReport::rank_sum_holds() const {
    if (cells == 0) return true;
    std::uint64_t sum = 0;
    for (auto t : rank_totals) sum += t;
    const std::uint64_t m = rank_totals.size();
    return sum == cells * m * (m + 1) / 2;
}

RankReport average_ranks(const RankMatrix& matrix) {
    matrix.validate();
    RankReport r;
    r.methods = matrix.methods;
    r.rank_totals.assign(matrix.methods.size(), 0);
    for (const auto& row : matrix.rows) {
        for (std::size_t m = 0; m < row.ranks.size(); ++m) r.rank_totals[m] += static_cast<std::uint64_t>(row.ranks[m]);
        ++r.cells;
    }
    return r;
}

json to_json(const RankReport& r) {
    json methods = json::array();
    for (std::size_t m = 0; m < r.methods.size(); ++m) {
        methods.push_back({{"method", r.methods[m]},
                           {"mean_rank", r.mean(m)},
                           {"mean_rank_display", r.cells ? format_fixed(r.rank_totals[m], r.cells, 2) : "-"},
                           {"rank_total", r.rank_totals[m]}});
    }
    return {{"methods", methods}, {"cells", r.cells}, {"rank_sum_holds", r.rank_sum_holds()}};
}

std::string format_table(const RankReport& r) {
    std::ostringstream out;
    out << std::left << std::setw(28) << "Method" << std::right << std::setw(12) << "Mean rank" << '\n';
    std::uint64_t total = 0;
    for (std::size_t m = 0; m < r.methods.size(); ++m) {
        out << std::left << std::setw(28) << r.methods[m] << std::right << std::setw(12)
            << (r.cells ? format_fixed(r.rank_totals[m], r.cells, 2) : "-") << '\n';
        total += r.rank_totals[m];
    }
    out << std::left << std::setw(28) << "Sum" << std::right << std::setw(12)
        << (r.cells ? format_fixed(total, r.cells, 2) : "-") << '\n';
    return out.str();
}

RankMatrix rank_matrix_from_json(const json& j) {
    RankMatrix m;
    try {
        m.methods = j.at("methods").get<std::vector<std::string>>();
        for (const auto& entry : j.at("rankings")) {
            RankMatrix::Row row;
            row.judge = entry.at("judge").get<std::string>();
            row.sample = entry.at("sample").get<std::string>();
            const auto& ranks = entry.at("ranks");
            if (!ranks.is_object() || ranks.size() != m.methods.size()) {
                fail(ErrorKind::NotAPermutation, "(" + row.judge + ", " + row.sample + ")");
            }
            for (const auto& method : m.methods) {
                if (!ranks.contains(method)) fail(ErrorKind::NotAPermutation, "(" + row.judge + ", " + row.sample + ")");
                row.ranks.push_back(ranks.at(method).get<int>());
            }
            m.rows.push_back(std::move(row));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::MalformedRecord, std::string("rank matrix: ") + e.what());
    }
    m.validate();
    return m;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n && !stop; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    stop = true;
                }
            }
        });
    }
    workers.clear();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<AblationResult> ablation_sweep(std::span<const corpus::NewsItem> items,
                                           std::span<const agents::PipelineConfig> configs, const Runner& runner,
                                           std::size_t jobs) {
    std::vector<AblationResult> results;
    for (const auto& cfg : configs) {
        AblationResult result;
        result.config = cfg;
        result.predictions.resize(items.size());
        parallel_for(items.size(), jobs, [&](std::size_t i) {
            const auto& item = items[i];
            if (!item.label) fail(ErrorKind::PreconditionFailed, "item '" + item.id + "' has no label");
            result.predictions[i] = {item.id, *item.label, runner(item, cfg), item.category, cfg};
        });
        result.report = accuracy_report(result.predictions);
        results.push_back(std::move(result));
    }
    return results;
}

std::string format_ablation_table(std::span<const AblationResult> results) {
    std::ostringstream out;
    const auto mark = [](bool on) { return on ? "yes" : "no"; };
    out << std::left << std::setw(9) << "Analyst" << std::setw(11) << "Detective" << std::setw(11) << "Retrieval"
        << std::setw(7) << "Event" << std::setw(8) << "Entity" << std::right << std::setw(8) << "All" << std::setw(11)
        << "Falsified" << std::setw(10) << "Pristine" << '\n';
    for (const auto& r : results) {
        out << std::left << std::setw(9) << "yes" << std::setw(11) << mark(r.config.use_detective_agent)
            << std::setw(11) << mark(r.config.use_retrieval_agent) << std::setw(7) << mark(r.config.use_event_evidence)
            << std::setw(8) << mark(r.config.use_entity_evidence) << std::right << std::setw(8)
            << cell(r.report.acc_all()) << std::setw(11) << cell(r.report.acc_falsified()) << std::setw(10)
            << cell(r.report.acc_pristine()) << '\n';
    }
    return out.str();
}

}  // namespace exclaim::evaluation

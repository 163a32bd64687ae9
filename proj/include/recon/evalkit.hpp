// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "recon/rollout.hpp"

namespace recon {

/// Lowercase, strip ASCII punctuation, drop the articles "a"/"an"/"the" as
/// whole words, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// 1 iff the normalized prediction equals some normalized gold answer. An
/// absent prediction scores 0. Throws std::invalid_argument on an empty
/// gold list.
int em_score(const std::optional<std::string>& prediction, std::span<const std::string> gold_answers);

struct QaEntry {
    std::string question;
    std::vector<std::string> golden_answers;
};

std::vector<QaEntry> load_qa_file(const std::string& path);

struct MetricsRow {
    std::string name;
    double mean_context_tokens = 0.0;
    double mean_wall_clock_s = 0.0;
    double mean_turns = 0.0;
    std::optional<double> em;
    std::size_t trajectories = 0;
};

inline constexpr std::string_view kContextLengthNote =
    "context tokens = all trajectory segments (policy text, information blocks, rethink continuations)";

struct MetricsReport {
    std::vector<MetricsRow> rows;
    MetricsRow aggregate;  // unweighted mean over rows

    static MetricsReport from_rows(std::vector<MetricsRow> rows);
};

/// Joins trajectories to QA entries on the question text. Throws
/// std::invalid_argument listing every question without a QA entry.
MetricsRow accumulate_metrics(std::string name, std::span<const Trajectory> trajectories,
                              std::span<const QaEntry> qa);

struct DeltaRow {
    std::string name;
    double context_reduction_pct = 0.0;
    double time_reduction_pct = 0.0;
    double turns_reduction_pct = 0.0;
    std::optional<double> em_diff;  // ours - baseline
};

struct ReportComparison {
    std::vector<DeltaRow> rows;
    DeltaRow aggregate;
};

/// (baseline - ours) / baseline, as a percentage. Rows are matched by name;
/// a row present on one side only throws std::invalid_argument.
ReportComparison compare_reports(const MetricsReport& baseline, const MetricsReport& ours);

double reduction_pct(double baseline, double ours);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const nlohmann::json& j);
MetricsReport load_metrics_report(const std::string& path);
nlohmann::json to_json(const ReportComparison& cmp);

std::string format_table(const MetricsReport& report);
std::string format_csv(const MetricsReport& report);
std::string format_comparison(const ReportComparison& cmp, const MetricsReport& baseline, const MetricsReport& ours);

}  // namespace recon

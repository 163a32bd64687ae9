// SPDX-License-Identifier: Apache-2.0
#include "recon/evalkit.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "recon/text.hpp"

namespace recon {
namespace {

bool is_ascii_punct(char c)
{
    auto u = static_cast<unsigned char>(c);
    return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

nlohmann::json row_to_json(const MetricsRow& r)
{
    return {
        {"name", r.name},
        {"mean_context_tokens", r.mean_context_tokens},
        {"mean_wall_clock_s", r.mean_wall_clock_s},
        {"mean_turns", r.mean_turns},
        {"em", r.em ? nlohmann::json(*r.em) : nlohmann::json(nullptr)},
        {"trajectories", r.trajectories},
    };
}

MetricsRow row_from_json(const nlohmann::json& j)
{
    MetricsRow r;
    r.name = j.at("name").get<std::string>();
    r.mean_context_tokens = j.at("mean_context_tokens").get<double>();
    r.mean_wall_clock_s = j.at("mean_wall_clock_s").get<double>();
    r.mean_turns = j.at("mean_turns").get<double>();
    if (auto it = j.find("em"); it != j.end() && !it->is_null())
        r.em = it->get<double>();
    r.trajectories = j.value("trajectories", std::size_t{0});
    return r;
}

nlohmann::json number_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json delta_to_json(const DeltaRow& d)
{
    return {
        {"name", d.name},
        {"context_reduction_pct", number_or_null(d.context_reduction_pct)},
        {"time_reduction_pct", number_or_null(d.time_reduction_pct)},
        {"turns_reduction_pct", number_or_null(d.turns_reduction_pct)},
        {"em_diff", d.em_diff ? nlohmann::json(*d.em_diff) : nlohmann::json(nullptr)},
    };
}

DeltaRow delta(const MetricsRow& base, const MetricsRow& ours)
{
    DeltaRow d;
    d.name = base.name;
    d.context_reduction_pct = reduction_pct(base.mean_context_tokens, ours.mean_context_tokens);
    d.time_reduction_pct = reduction_pct(base.mean_wall_clock_s, ours.mean_wall_clock_s);
    d.turns_reduction_pct = reduction_pct(base.mean_turns, ours.mean_turns);
    if (base.em && ours.em)
        d.em_diff = *ours.em - *base.em;
    return d;
}

std::string fixed(double v, int precision)
{
    if (!std::isfinite(v))
        return "n/a";
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

}  // namespace

std::string normalize_answer(std::string_view text)
{
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : to_lower_ascii(text)) {
        if (!is_ascii_punct(c))
            cleaned.push_back(c);
    }
    std::string out;
    for (const auto& word : WhitespaceTokenizer{}.tokenize(cleaned)) {
        if (word == "a" || word == "an" || word == "the")
            continue;
        if (!out.empty())
            out.push_back(' ');
        out.append(word);
    }
    return out;
}

int em_score(const std::optional<std::string>& prediction, std::span<const std::string> gold_answers)
{
    if (gold_answers.empty())
        throw std::invalid_argument("em_score: empty gold answer list");
    if (!prediction)
        return 0;
    const auto pred = normalize_answer(*prediction);
    for (const auto& g : gold_answers) {
        if (normalize_answer(g) == pred)
            return 1;
    }
    return 0;
}

std::vector<QaEntry> load_qa_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open QA file " + path);
    std::vector<QaEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back(QaEntry{j.at("question").get<std::string>(),
                                  j.at("golden_answers").get<std::vector<std::string>>()});
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ", line " + std::to_string(line_no) + ": malformed QA line: " + e.what());
        }
    }
    return out;
}

MetricsReport MetricsReport::from_rows(std::vector<MetricsRow> rows)
{
    MetricsReport report;
    report.rows = std::move(rows);
    report.aggregate.name = "Avg.";
    if (report.rows.empty())
        return report;

    const double n = static_cast<double>(report.rows.size());
    bool all_em = true;
    double em_sum = 0.0;
    for (const auto& r : report.rows) {
        report.aggregate.mean_context_tokens += r.mean_context_tokens / n;
        report.aggregate.mean_wall_clock_s += r.mean_wall_clock_s / n;
        report.aggregate.mean_turns += r.mean_turns / n;
        report.aggregate.trajectories += r.trajectories;
        if (r.em)
            em_sum += *r.em;
        else
            all_em = false;
    }
    if (all_em)
        report.aggregate.em = em_sum / n;
    return report;
}

MetricsRow accumulate_metrics(std::string name, std::span<const Trajectory> trajectories, std::span<const QaEntry> qa)
{
    if (trajectories.empty())
        throw std::invalid_argument("accumulate_metrics: no trajectories for " + name);

    std::map<std::string, const QaEntry*> by_question;
    for (const auto& e : qa)
        by_question.emplace(e.question, &e);

    std::vector<std::string> unmatched;
    for (const auto& t : trajectories) {
        if (!by_question.count(t.question))
            unmatched.push_back(t.question);
    }
    if (!unmatched.empty()) {
        std::string list;
        for (const auto& q : unmatched)
            list += "\n  " + q;
        throw std::invalid_argument("questions missing from QA file:" + list);
    }

    MetricsRow row;
    row.name = std::move(name);
    row.trajectories = trajectories.size();
    double context = 0.0;
    double seconds = 0.0;
    double turns = 0.0;
    double em = 0.0;
    for (const auto& t : trajectories) {
        context += static_cast<double>(t.total_tokens());
        seconds += t.wall_clock_ms / 1000.0;
        turns += t.turns_used;
        em += em_score(t.final_answer, by_question.at(t.question)->golden_answers);
    }
    const double n = static_cast<double>(trajectories.size());
    row.mean_context_tokens = context / n;
    row.mean_wall_clock_s = seconds / n;
    row.mean_turns = turns / n;
    row.em = em / n;
    return row;
}

double reduction_pct(double baseline, double ours)
{
    if (baseline == 0.0)
        return ours == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    return (baseline - ours) / baseline * 100.0;
}

ReportComparison compare_reports(const MetricsReport& baseline, const MetricsReport& ours)
{
    std::map<std::string, const MetricsRow*> theirs;
    for (const auto& r : ours.rows)
        theirs.emplace(r.name, &r);
    if (theirs.size() != baseline.rows.size())
        throw std::invalid_argument("reports have different dataset rows");

    ReportComparison cmp;
    for (const auto& b : baseline.rows) {
        auto it = theirs.find(b.name);
        if (it == theirs.end())
            throw std::invalid_argument("dataset row '" + b.name + "' missing from the compared report");
        cmp.rows.push_back(delta(b, *it->second));
    }
    cmp.aggregate = delta(baseline.aggregate, ours.aggregate);
    return cmp;
}

nlohmann::json to_json(const MetricsReport& report)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back(row_to_json(r));
    return {{"rows", rows}, {"aggregate", row_to_json(report.aggregate)}, {"note", kContextLengthNote}};
}

// The aggregate is always recomputed from the rows on load.
MetricsReport metrics_report_from_json(const nlohmann::json& j)
{
    std::vector<MetricsRow> rows;
    for (const auto& r : j.at("rows"))
        rows.push_back(row_from_json(r));
    return MetricsReport::from_rows(std::move(rows));
}

MetricsReport load_metrics_report(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open report " + path);
    try {
        return metrics_report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

nlohmann::json to_json(const ReportComparison& cmp)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& d : cmp.rows)
        rows.push_back(delta_to_json(d));
    return {{"rows", rows}, {"aggregate", delta_to_json(cmp.aggregate)}};
}

std::string format_table(const MetricsReport& report)
{
    std::ostringstream os;
    os << "# " << kContextLengthNote << '\n';
    os << std::left << std::setw(14) << "dataset" << std::right << std::setw(12) << "context" << std::setw(12)
       << "time_s" << std::setw(10) << "turns" << std::setw(10) << "EM" << std::setw(8) << "n" << '\n';
    auto line = [&os](const MetricsRow& r) {
        os << std::left << std::setw(14) << r.name << std::right << std::setw(12) << fixed(r.mean_context_tokens, 1)
           << std::setw(12) << fixed(r.mean_wall_clock_s, 3) << std::setw(10) << fixed(r.mean_turns, 2)
           << std::setw(10) << (r.em ? fixed(*r.em, 3) : "-") << std::setw(8) << r.trajectories << '\n';
    };
    for (const auto& r : report.rows)
        line(r);
    line(report.aggregate);
    return os.str();
}

std::string format_csv(const MetricsReport& report)
{
    std::ostringstream os;
    os << "dataset,mean_context_tokens,mean_wall_clock_s,mean_turns,em,trajectories\n";
    auto line = [&os](const MetricsRow& r) {
        os << r.name << ',' << r.mean_context_tokens << ',' << r.mean_wall_clock_s << ',' << r.mean_turns << ','
           << (r.em ? std::to_string(*r.em) : "") << ',' << r.trajectories << '\n';
    };
    for (const auto& r : report.rows)
        line(r);
    line(report.aggregate);
    return os.str();
}

std::string format_comparison(const ReportComparison& cmp, const MetricsReport& baseline, const MetricsReport& ours)
{
    std::map<std::string, std::pair<const MetricsRow*, const MetricsRow*>> pairs;
    for (const auto& r : baseline.rows)
        pairs[r.name].first = &r;
    for (const auto& r : ours.rows)
        pairs[r.name].second = &r;

    std::ostringstream os;
    os << std::left << std::setw(14) << "dataset" << std::right << std::setw(11) << "ctx_base" << std::setw(11)
       << "ctx_ours" << std::setw(9) << "ctx_red%" << std::setw(10) << "time_base" << std::setw(10) << "time_ours"
       << std::setw(10) << "time_red%" << std::setw(11) << "turns_base" << std::setw(11) << "turns_ours"
       << std::setw(10) << "EM_diff" << '\n';
    auto line = [&os](const DeltaRow& d, const MetricsRow& b, const MetricsRow& o) {
        os << std::left << std::setw(14) << d.name << std::right << std::setw(11) << fixed(b.mean_context_tokens, 1)
           << std::setw(11) << fixed(o.mean_context_tokens, 1) << std::setw(9) << fixed(d.context_reduction_pct, 1)
           << std::setw(10) << fixed(b.mean_wall_clock_s, 1) << std::setw(10) << fixed(o.mean_wall_clock_s, 1)
           << std::setw(10) << fixed(d.time_reduction_pct, 1) << std::setw(11) << fixed(b.mean_turns, 2)
           << std::setw(11) << fixed(o.mean_turns, 2) << std::setw(10) << (d.em_diff ? fixed(*d.em_diff, 3) : "-")
           << '\n';
    };
    for (const auto& d : cmp.rows) {
        const auto& [b, o] = pairs.at(d.name);
        line(d, *b, *o);
    }
    line(cmp.aggregate, baseline.aggregate, ours.aggregate);
    return os.str();
}

}  // namespace recon

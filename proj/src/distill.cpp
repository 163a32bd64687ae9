// SPDX-License-Identifier: Apache-2.0
#include "recon/distill.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "recon/protocol.hpp"
#include "recon/text.hpp"

namespace recon {
namespace {

void add_unique(std::vector<std::string>& list, std::set<std::string>& seen, std::string_view query)
{
    std::string q = trim(query);
    if (seen.insert(q).second)
        list.push_back(std::move(q));
}

std::string with_thousands(std::size_t n)
{
    std::string digits = std::to_string(n);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0)
            out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

std::vector<AspectId> resolve_aspects(const std::vector<AspectId>& requested)
{
    if (!requested.empty())
        return requested;
    std::vector<AspectId> all;
    for (const auto& a : aspect_registry())
        all.push_back(a.id);
    return all;
}

}  // namespace

QueryMap collect_queries(std::span<const Trajectory> trajectories)
{
    QueryMap out;
    std::map<std::string, std::set<std::string>> seen;
    for (const auto& t : trajectories) {
        auto& list = out[t.question];
        auto& s = seen[t.question];
        for (const auto& seg : t.segments) {
            if (seg.kind != SegmentKind::PolicyText)
                continue;
            const auto action = parse_segment(seg.text);
            if (const auto* search = std::get_if<SearchAction>(&action))
                add_unique(list, s, search->query);
        }
    }
    return out;
}

QueryMap collect_queries(const QueryMap& queries)
{
    QueryMap out;
    for (const auto& [question, list] : queries) {
        auto& dst = out[question];
        std::set<std::string> seen;
        for (const auto& q : list)
            add_unique(dst, seen, q);
    }
    return out;
}

QueryMap collect_queries_from_log(const std::string& path)
{
    const auto trajectories = load_trajectory_log(path);
    return collect_queries(trajectories);
}

std::size_t query_count(const QueryMap& queries)
{
    std::size_t n = 0;
    for (const auto& [_, list] : queries)
        n += list.size();
    return n;
}

nlohmann::json to_json(const DistillTriplet& t)
{
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& d : t.documents)
        docs.push_back(to_json(d));
    nlohmann::json j{
        {"source_question", t.source_question},
        {"step_query", t.step_query},
        {"documents", std::move(docs)},
        {"aspect", std::string(to_string(t.aspect))},
        {"rendered_prompt", t.rendered_prompt},
        {"teacher_summary", nullptr},
    };
    if (t.teacher_summary)
        j["teacher_summary"] = *t.teacher_summary;
    if (!t.source_dataset.empty())
        j["source_dataset"] = t.source_dataset;
    return j;
}

DistillTriplet distill_triplet_from_json(const nlohmann::json& j)
{
    DistillTriplet t;
    t.source_question = j.at("source_question").get<std::string>();
    t.step_query = j.at("step_query").get<std::string>();
    for (const auto& d : j.at("documents"))
        t.documents.push_back(document_from_json(d));
    t.aspect = parse_aspect(j.at("aspect").get<std::string>());
    t.rendered_prompt = j.at("rendered_prompt").get<std::string>();
    if (j.contains("teacher_summary") && !j["teacher_summary"].is_null())
        t.teacher_summary = j["teacher_summary"].get<std::string>();
    t.source_dataset = j.value("source_dataset", "");
    return t;
}

TripletBuild build_triplets(const QueryMap& queries, Retriever& retriever, const TripletOptions& options)
{
    if (options.top_k == 0)
        throw std::invalid_argument("build_triplets: top_k must be positive");
    const auto aspects = resolve_aspects(options.aspects);

    struct Job {
        const std::string* question;
        const std::string* query;
    };
    std::vector<Job> jobs;
    for (const auto& [question, list] : queries) {
        for (const auto& q : list)
            jobs.push_back({&question, &q});
    }

    struct Slot {
        std::vector<Document> docs;
        std::optional<std::string> error;
    };
    std::vector<Slot> slots(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                slots[i].docs = retriever.search(*jobs[i].query, options.top_k);
                if (slots[i].docs.empty())
                    slots[i].error = "no documents retrieved";
            } catch (const std::exception& e) {
                slots[i].error = std::string("retrieval failed: ") + e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const int n = std::max(1, std::min<int>(options.parallel, static_cast<int>(jobs.size())));
        for (int i = 1; i < n; ++i)
            pool.emplace_back(worker);
        worker();
    }

    TripletBuild build;
    build.expected = jobs.size() * aspects.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        auto& slot = slots[i];
        if (slot.error) {
            build.skipped.push_back({*job.question, *job.query, *slot.error, aspects.size()});
            continue;
        }
        if (slot.docs.size() > options.top_k)
            slot.docs.resize(options.top_k);
        for (auto aspect : aspects) {
            DistillTriplet t;
            t.source_question = *job.question;
            t.step_query = *job.query;
            t.documents = slot.docs;
            t.aspect = aspect;
            t.rendered_prompt = build_summary_prompt(t.source_question, t.step_query, t.documents, aspect);
            t.source_dataset = options.source_dataset;
            build.triplets.push_back(std::move(t));
        }
    }
    return build;
}

nlohmann::json to_json(const EmitStats& stats)
{
    return {
        {"records", stats.records},
        {"per_aspect", stats.per_aspect},
        {"per_dataset", stats.per_dataset},
        {"teacher_summaries", stats.teacher_summaries},
        {"teacher_errors", stats.teacher_errors},
    };
}

EmitStats emit_dataset(std::span<DistillTriplet> triplets, const std::string& path, GenerationBackend* teacher,
                       const EmitOptions& options)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write distillation dataset: " + path);

    EmitStats stats;
    if (teacher != nullptr) {
        std::mutex errors_mutex;
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < triplets.size(); i = next++) {
                auto& t = triplets[i];
                GenerationRequest req{t.rendered_prompt, options.max_tokens, kSummarizerSampling, {}};
                auto delay = std::chrono::milliseconds(options.backoff_ms);
                for (int attempt = 0;; ++attempt) {
                    try {
                        t.teacher_summary = trim(teacher->generate(req).text);
                        break;
                    } catch (const std::exception& e) {
                        if (attempt >= options.retries) {
                            std::lock_guard lock(errors_mutex);
                            stats.teacher_errors.push_back("record " + std::to_string(i) + ": " + e.what());
                            break;
                        }
                        std::this_thread::sleep_for(delay);
                        delay *= 2;
                    }
                }
            }
        };
        std::vector<std::jthread> pool;
        const int n = std::max(1, std::min<int>(options.max_in_flight, static_cast<int>(triplets.size())));
        for (int i = 1; i < n; ++i)
            pool.emplace_back(worker);
        worker();
        pool.clear();
        std::sort(stats.teacher_errors.begin(), stats.teacher_errors.end());
    }

    for (const auto& aspect : aspect_registry())
        stats.per_aspect[std::string(aspect.key)] = 0;
    for (const auto& t : triplets) {
        out << to_json(t).dump() << '\n';
        ++stats.records;
        ++stats.per_aspect[std::string(to_string(t.aspect))];
        ++stats.per_dataset[t.source_dataset.empty() ? "unlabeled" : t.source_dataset];
        if (t.teacher_summary)
            ++stats.teacher_summaries;
    }
    if (!out)
        throw std::runtime_error("write failed: " + path);
    return stats;
}

std::string format_distill_report(const TripletBuild& build, const EmitStats& stats)
{
    std::ostringstream os;
    os << "triplets: " << stats.records << " (expected " << build.expected << ", skipped "
       << build.expected - build.triplets.size() << ")\n";
    for (const auto& s : build.skipped)
        os << "  skipped [" << s.source_question << "] \"" << s.step_query << "\": " << s.reason << " (" << s.triplets
           << " triplets)\n";
    os << "per aspect:\n";
    for (const auto& [aspect, n] : stats.per_aspect)
        os << "  " << aspect << ": " << n << "\n";
    os << "per source dataset:\n";
    for (const auto& [dataset, n] : stats.per_dataset)
        os << "  " << dataset << ": " << with_thousands(n) << "\n";
    if (stats.teacher_summaries > 0 || !stats.teacher_errors.empty()) {
        os << "teacher summaries: " << stats.teacher_summaries << ", errors: " << stats.teacher_errors.size() << "\n";
        for (const auto& e : stats.teacher_errors)
            os << "  " << e << "\n";
    }
    os << "reference scale:";
    for (const auto& r : kReferenceTripletCounts)
        os << " " << r.dataset << " " << with_thousands(r.triplets);
    os << " triplets\n";
    return os.str();
}

}  // namespace recon

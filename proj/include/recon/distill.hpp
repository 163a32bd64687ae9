// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recon/condenser.hpp"
#include "recon/generation.hpp"
#include "recon/retrieval.hpp"
#include "recon/rollout.hpp"

namespace recon {

/// Source question -> its search queries, first occurrence order.
using QueryMap = std::map<std::string, std::vector<std::string>>;

/// Search queries per question with exact duplicates (after trimming)
/// removed. Trajectories sharing a question are merged; queries are never
/// merged across questions.
QueryMap collect_queries(std::span<const Trajectory> trajectories);
QueryMap collect_queries(const QueryMap& queries);
/// Throws with the line number of the first malformed log line.
QueryMap collect_queries_from_log(const std::string& path);

std::size_t query_count(const QueryMap& queries);

struct DistillTriplet {
    std::string source_question;
    std::string step_query;
    std::vector<Document> documents;
    AspectId aspect = AspectId::Clarity;
    std::string rendered_prompt;
    std::optional<std::string> teacher_summary;
    std::string source_dataset;
};

nlohmann::json to_json(const DistillTriplet& t);
DistillTriplet distill_triplet_from_json(const nlohmann::json& j);

struct SkippedQuery {
    std::string source_question;
    std::string step_query;
    std::string reason;
    std::size_t triplets = 0;  // triplets not produced because of this skip
};

struct TripletBuild {
    std::vector<DistillTriplet> triplets;
    std::vector<SkippedQuery> skipped;
    std::size_t expected = 0;  // queries x aspects
};

struct TripletOptions {
    std::size_t top_k = 5;
    std::vector<AspectId> aspects;  // empty: every registered aspect
    std::string source_dataset;
    int parallel = 1;
};

/// One triplet per (question, query, aspect). Queries with no hits or a
/// failing retriever are skipped and recorded, never fatal.
TripletBuild build_triplets(const QueryMap& queries, Retriever& retriever, const TripletOptions& options = {});

struct EmitOptions {
    int max_in_flight = 4;
    int retries = 2;
    int backoff_ms = 200;  // doubled after every failed attempt
    int max_tokens = 500;
};

struct EmitStats {
    std::size_t records = 0;
    std::map<std::string, std::size_t> per_aspect;
    std::map<std::string, std::size_t> per_dataset;
    std::size_t teacher_summaries = 0;
    std::vector<std::string> teacher_errors;
};

nlohmann::json to_json(const EmitStats& stats);

/// Writes one JSON line per triplet. With a teacher, each rendered prompt is
/// sent once (with retries); a teacher that keeps failing leaves
/// teacher_summary null and the error lands in the stats.
EmitStats emit_dataset(std::span<DistillTriplet> triplets, const std::string& path, GenerationBackend* teacher,
                       const EmitOptions& options = {});

struct ReferenceCount {
    std::string_view dataset;
    std::size_t triplets;
};

/// Published triplet totals, printed next to local counts for scale.
inline constexpr ReferenceCount kReferenceTripletCounts[] = {{"HotpotQA", 468547}, {"NQ", 1002329}};

std::string format_distill_report(const TripletBuild& build, const EmitStats& stats);

}  // namespace recon

// SPDX-License-Identifier: Apache-2.0
// Scripted rollout with every loop branch and its hand-traced result.
#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "recon/rollout.hpp"

namespace fixtures {

/// Summary text is the retrieved passages joined by single spaces.
class IdentityCondenser final : public recon::Condenser {
public:
    recon::Summary condense(std::string_view, std::string_view query, std::span<const recon::Document> docs) override
    {
        recon::Summary s;
        s.source_query = std::string(query);
        for (const auto& d : docs) {
            s.text += (s.text.empty() ? "" : " ") + d.text;
            s.source_doc_ids.push_back(d.id);
        }
        return s;
    }
};

/// Records every request before delegating.
class RecordingBackend final : public recon::GenerationBackend {
public:
    explicit RecordingBackend(recon::GenerationBackend& inner) : inner_(inner) {}
    recon::GenerationResponse generate(const recon::GenerationRequest& request) override
    {
        std::lock_guard lock(mutex_);
        requests.push_back(request);
        return inner_.generate(request);
    }
    std::vector<recon::GenerationRequest> requests;

private:
    recon::GenerationBackend& inner_;
    std::mutex mutex_;
};

inline std::vector<recon::Document> france_docs()
{
    return {{"p1", "Paris", "Paris is the capital of France."}, {"p2", "Lyon", "Lyon is a city in France."}};
}

inline const std::string kTraceTemplate = "Solve it.\nQuestion: {question}";
inline const std::string kTraceQuestion = "What is the capital of France?";

/// Search, Invalid, Search with zero hits, Answer with trailing text.
inline std::vector<std::string> trace_script()
{
    return {
        "<search> capital of France </search>",
        "hmm, not sure",
        "<search> zzzz </search>",
        "<answer> Paris </answer> trailing words",
    };
}

struct ExpectedSegment {
    recon::SegmentKind kind;
    std::string text;
    std::size_t tokens;
};

inline std::vector<ExpectedSegment> trace_expected()
{
    using K = recon::SegmentKind;
    return {
        {K::PolicyText, "<search> capital of France </search>", 5},
        {K::Information, "<information> Paris is the capital of France. Lyon is a city in France. </information>", 14},
        {K::PolicyText, "hmm, not sure", 3},
        {K::Rethink, "My action is not correct. Let me rethink.", 8},
        {K::PolicyText, "<search> zzzz </search>", 3},
        {K::Information, "<information> No relevant information found. </information>", 6},
        {K::PolicyText, "<answer> Paris </answer>", 3},
    };
}

/// Serialised trajectory with wall_clock_ms zeroed.
inline const std::string kTraceJson =
    R"({"final_answer":"Paris",)"
    R"("notes":["action 3: discarded 15 bytes after stop token"],)"
    R"("question":"What is the capital of France?",)"
    R"("segments":[)"
    R"({"kind":"policy","text":"<search> capital of France </search>","token_count":5},)"
    R"({"kind":"information","text":"<information> Paris is the capital of France. Lyon is a city in France. </information>","token_count":14},)"
    R"({"kind":"policy","text":"hmm, not sure","token_count":3},)"
    R"({"kind":"rethink","text":"My action is not correct. Let me rethink.","token_count":8},)"
    R"({"kind":"policy","text":"<search> zzzz </search>","token_count":3},)"
    R"({"kind":"information","text":"<information> No relevant information found. </information>","token_count":6},)"
    R"({"kind":"policy","text":"<answer> Paris </answer>","token_count":3}],)"
    R"("stop":"close_answer","turns_used":2,"wall_clock_ms":0.0})";

}  // namespace fixtures

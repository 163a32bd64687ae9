// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recon/generation.hpp"
#include "recon/retrieval.hpp"
#include "recon/text.hpp"

namespace recon {

enum class AspectId { Clarity, Coherence, Completeness, Coverage, FactualCorrectness, Logicality };

struct AspectSpec {
    AspectId id;
    std::string_view key;          // "factual_correctness"
    std::string_view name;         // "Factual Correctness"
    std::string_view explanation;
};

/// All six aspects, in a fixed order.
std::span<const AspectSpec> aspect_registry();
const AspectSpec& aspect_spec(AspectId id);
std::string_view to_string(AspectId id);

/// Throws std::invalid_argument listing the valid ids.
AspectId parse_aspect(std::string_view key);

/// Renders the teacher prompt for a multi-document query-focused summary.
/// One "[Doc k]" entry per document, in rank order.
std::string build_summary_prompt(std::string_view question, std::string_view query,
                                 std::span<const Document> docs, AspectId aspect);
std::string build_summary_prompt(std::string_view question, std::string_view query,
                                 std::span<const Document> docs, std::string_view aspect_key);

struct Summary {
    std::string text;
    std::string source_query;
    std::vector<std::string> source_doc_ids;
    AspectId aspect = AspectId::Clarity;
    std::size_t token_count = 0;
};

/// "Doc k (Title: ...) text" lines in rank order; the uncondensed baseline
/// format for information blocks.
std::string format_raw_documents(std::span<const Document> docs);

/// Splits on '.', '!' and '?', keeping the terminator; whitespace-only
/// pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Query-focused extractive condensation: keep the `sentence_budget`
/// sentences sharing the most distinct query terms, emitted in document
/// order. Empty text when no sentence shares a term with the query.
Summary condense_extractive(std::string_view query, std::span<const Document> docs,
                            std::size_t sentence_budget, const Tokenizer& tokenizer = default_tokenizer());

class Condenser {
public:
    virtual ~Condenser() = default;
    virtual Summary condense(std::string_view question, std::string_view query, std::span<const Document> docs) = 0;
};

class ExtractiveCondenser final : public Condenser {
public:
    explicit ExtractiveCondenser(std::size_t sentence_budget, AspectId aspect = AspectId::Clarity,
                                 const Tokenizer& tokenizer = default_tokenizer());
    Summary condense(std::string_view question, std::string_view query, std::span<const Document> docs) override;

private:
    std::size_t budget_;
    AspectId aspect_;
    const Tokenizer& tokenizer_;
};

/// Passes documents through in the raw baseline format.
class RawCondenser final : public Condenser {
public:
    explicit RawCondenser(const Tokenizer& tokenizer = default_tokenizer()) : tokenizer_(tokenizer) {}
    Summary condense(std::string_view question, std::string_view query, std::span<const Document> docs) override;

private:
    const Tokenizer& tokenizer_;
};

/// Sends the rendered teacher prompt through the generation wire contract.
Summary condense_remote(GenerationBackend& backend, std::string_view question, std::string_view query,
                        std::span<const Document> docs, AspectId aspect,
                        SamplingParams sampling = kSummarizerSampling, int max_tokens = 512,
                        const Tokenizer& tokenizer = default_tokenizer());

class RemoteCondenser final : public Condenser {
public:
    RemoteCondenser(Endpoint endpoint, AspectId aspect, SamplingParams sampling = kSummarizerSampling,
                    std::chrono::milliseconds timeout = std::chrono::seconds(60));
    Summary condense(std::string_view question, std::string_view query, std::span<const Document> docs) override;

private:
    HttpGenerationBackend backend_;
    AspectId aspect_;
    SamplingParams sampling_;
};

}  // namespace recon

// SPDX-License-Identifier: Apache-2.0
#include "recon/condenser.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <unordered_set>

namespace recon {
namespace {

constexpr std::array<AspectSpec, 6> kAspects{{
    {AspectId::Clarity, "clarity", "Clarity",
     "Write in a clear, accessible manner that is easy to understand. Use simple, direct language and avoid jargon or overly complex sentences. Present information in a straightforward way that makes the key points immediately apparent to the reader. Ensure that each statement is unambiguous and easy to follow."},
    {AspectId::Coherence, "coherence", "Coherence",
     "Create a logically coherent and well-structured summary that flows naturally from one point to the next. Use clear transitions, logical connections, and a consistent narrative structure. Ensure that ideas are presented in a logical sequence that makes sense to the reader, with each piece of information building upon the previous one."},
    {AspectId::Completeness, "completeness", "Completeness",
     "Make sure that the support context includes all major facts from the retrieved documents that are needed to answer the user's question. Do not omit important information, even if it seems implicit. The summary should be as thorough as possible within a compact form."},
    {AspectId::Coverage, "coverage", "Coverage",
     "Ensure comprehensive coverage of all relevant information from the retrieved documents. Include all key facts, data points, examples, and supporting details that could be useful for answering the question. Avoid omitting important information even if it seems redundant, as comprehensive coverage is prioritized over brevity."},
    {AspectId::FactualCorrectness, "factual_correctness", "Factual Correctness",
     "Ensure that every statement in the support context is factually accurate and directly supported by the retrieved documents. Do not include any information that is inferred, assumed, or fabricated. Avoid hallucinations, exaggerations, or unsupported claims."},
    {AspectId::Logicality, "logicality", "Logicality",
     "Present information in a logically sound manner with clear reasoning and valid conclusions. Ensure that cause-and-effect relationships are properly established, that arguments are well-structured, and that conclusions follow logically from the presented evidence. Avoid logical fallacies and ensure that the information flows in a way that makes logical sense."},
}};

constexpr std::string_view kPromptPreamble =
    "You are a helpful assistant in a retrieval-augmented question-answering system.\n"
    "\n"
    "You will be given:\n"
    "- A user question\n"
    "- A search prompt (query) used to retrieve information\n"
    "- A set of documents retrieved using that query\n"
    "\n"
    "Your task is to generate a support context — a concise, well-structured summary that captures "
    "all the key facts from the documents which are relevant to answering the user question.\n"
    "\n"
    "Important Instructions:\n"
    "- Do not answer the question directly.\n"
    "- Do not add external knowledge or hallucinate any content.\n"
    "- Use only the information found in the retrieved documents.\n"
    "- Rephrase and compress where appropriate, but preserve factual meaning.\n"
    "- Maintain consistent tone and structure throughout.\n"
    "- Focus on maximizing the following aspect in your output:\n"
    "\n";

constexpr std::string_view kPromptClosing =
    "Please write the support context for me. Make it clear, factual, and optimized for the aspect defined above.\n";

std::string render_doc(const Document& doc)
{
    if (doc.title.empty())
        return doc.text;
    return "(Title: " + doc.title + ") " + doc.text;
}

std::vector<std::string> doc_ids(std::span<const Document> docs)
{
    std::vector<std::string> ids;
    ids.reserve(docs.size());
    for (const auto& d : docs)
        ids.push_back(d.id);
    return ids;
}

}  // namespace

std::span<const AspectSpec> aspect_registry()
{
    return kAspects;
}

const AspectSpec& aspect_spec(AspectId id)
{
    for (const auto& a : kAspects) {
        if (a.id == id)
            return a;
    }
    throw std::invalid_argument("unregistered aspect");
}

std::string_view to_string(AspectId id)
{
    return aspect_spec(id).key;
}

AspectId parse_aspect(std::string_view key)
{
    std::string valid;
    for (const auto& a : kAspects) {
        if (a.key == key)
            return a.id;
        if (!valid.empty())
            valid += ", ";
        valid += a.key;
    }
    throw std::invalid_argument("unknown aspect '" + std::string(key) + "'; valid ids: " + valid);
}

std::string build_summary_prompt(std::string_view question, std::string_view query, std::span<const Document> docs,
                                 AspectId aspect)
{
    if (docs.empty())
        throw std::invalid_argument("build_summary_prompt needs at least one document");
    const auto& spec = aspect_spec(aspect);

    std::string out(kPromptPreamble);
    out.append("Focus Aspect: ").append(spec.name).append("\n");
    out.append("→ ").append(spec.explanation).append("\n\n");
    out.append("User Question:\n").append(question).append("\n\n");
    out.append("Search Query (used by the retriever):\n").append(query).append("\n\n");
    out.append("Retrieved Documents:\n\n");
    for (std::size_t i = 0; i < docs.size(); ++i)
        out.append("[Doc ").append(std::to_string(i + 1)).append("] ").append(render_doc(docs[i])).append("\n");
    out.append("\n").append(kPromptClosing);
    return out;
}

std::string build_summary_prompt(std::string_view question, std::string_view query, std::span<const Document> docs,
                                 std::string_view aspect_key)
{
    return build_summary_prompt(question, query, docs, parse_aspect(aspect_key));
}

std::string format_raw_documents(std::span<const Document> docs)
{
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0)
            out.push_back('\n');
        out.append("Doc ").append(std::to_string(i + 1)).append(" (Title: ").append(docs[i].title).append(") ");
        out.append(docs[i].text);
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        auto s = trim(text.substr(start, end - start));
        if (!s.empty())
            out.push_back(std::move(s));
        start = end;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '.' || text[i] == '!' || text[i] == '?') {
            // Runs like "?!" or "..." stay attached to one sentence.
            while (i + 1 < text.size() && (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?'))
                ++i;
            flush(i + 1);
        }
    }
    flush(text.size());
    return out;
}

Summary condense_extractive(std::string_view query, std::span<const Document> docs, std::size_t sentence_budget,
                            const Tokenizer& tokenizer)
{
    if (sentence_budget == 0)
        throw std::invalid_argument("sentence_budget must be >= 1");

    struct Candidate {
        std::size_t order;  // (doc rank, position) flattened
        std::size_t score;
        std::string text;
    };

    auto query_terms_list = lexical_terms(query);
    std::unordered_set<std::string> query_terms(query_terms_list.begin(), query_terms_list.end());

    std::vector<Candidate> candidates;
    for (const auto& doc : docs) {
        for (auto& sentence : split_sentences(doc.text)) {
            std::unordered_set<std::string> shared;
            for (auto& t : lexical_terms(sentence)) {
                if (query_terms.count(t))
                    shared.insert(std::move(t));
            }
            candidates.push_back(Candidate{candidates.size(), shared.size(), std::move(sentence)});
        }
    }

    Summary summary;
    summary.source_query = std::string(query);
    summary.source_doc_ids = doc_ids(docs);

    const bool any_match = std::any_of(candidates.begin(), candidates.end(), [](const Candidate& c) { return c.score > 0; });
    if (!any_match)
        return summary;

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    candidates.resize(std::min(sentence_budget, candidates.size()));
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.order < b.order; });

    for (const auto& c : candidates) {
        if (!summary.text.empty())
            summary.text.push_back(' ');
        summary.text.append(c.text);
    }
    summary.token_count = tokenizer.count(summary.text);
    return summary;
}

ExtractiveCondenser::ExtractiveCondenser(std::size_t sentence_budget, AspectId aspect, const Tokenizer& tokenizer)
    : budget_(sentence_budget), aspect_(aspect), tokenizer_(tokenizer)
{
    if (budget_ == 0)
        throw std::invalid_argument("sentence_budget must be >= 1");
}

Summary ExtractiveCondenser::condense(std::string_view, std::string_view query, std::span<const Document> docs)
{
    auto s = condense_extractive(query, docs, budget_, tokenizer_);
    s.aspect = aspect_;
    return s;
}

Summary RawCondenser::condense(std::string_view, std::string_view query, std::span<const Document> docs)
{
    Summary s;
    s.text = format_raw_documents(docs);
    s.source_query = std::string(query);
    s.source_doc_ids = doc_ids(docs);
    s.token_count = tokenizer_.count(s.text);
    return s;
}

Summary condense_remote(GenerationBackend& backend, std::string_view question, std::string_view query,
                        std::span<const Document> docs, AspectId aspect, SamplingParams sampling, int max_tokens,
                        const Tokenizer& tokenizer)
{
    Summary s;
    s.source_query = std::string(query);
    s.source_doc_ids = doc_ids(docs);
    s.aspect = aspect;
    // Zero documents means nothing to summarize; the caller wraps the placeholder.
    if (docs.empty())
        return s;

    GenerationRequest request;
    request.prompt = build_summary_prompt(question, query, docs, aspect);
    request.max_tokens = max_tokens;
    request.sampling = sampling;
    s.text = trim(backend.generate(request).text);
    s.token_count = tokenizer.count(s.text);
    return s;
}

RemoteCondenser::RemoteCondenser(Endpoint endpoint, AspectId aspect, SamplingParams sampling,
                                 std::chrono::milliseconds timeout)
    : backend_(std::move(endpoint), timeout), aspect_(aspect), sampling_(sampling)
{
}

Summary RemoteCondenser::condense(std::string_view question, std::string_view query, std::span<const Document> docs)
{
    return condense_remote(backend_, question, query, docs, aspect_, sampling_);
}

}  // namespace recon

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "recon/http.hpp"

namespace recon {

struct Document {
    std::string id;
    std::string title;
    std::string text;

    bool operator==(const Document&) const = default;
};

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

struct ScoredDocument {
    Document doc;
    double score = 0.0;
};

struct Posting {
    std::uint32_t doc;   // ordinal; ordinals follow ascending document id
    std::uint32_t freq;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable inverted index over a passage corpus, scored with BM25.
/// Documents are stored sorted by id, so postings sorted by ordinal are
/// sorted by id as well.
class CorpusIndex {
public:
    CorpusIndex() = default;

    /// Throws CorpusError on duplicate ids or empty passage text.
    static CorpusIndex build(std::vector<Document> docs, Bm25Params params = {});

    std::size_t size() const { return docs_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    std::span<const Document> documents() const { return docs_; }
    std::span<const std::uint32_t> doc_lengths() const { return doc_lengths_; }
    std::span<const Posting> postings(std::string_view term) const;
    std::size_t vocabulary_size() const { return postings_.size(); }
    const Bm25Params& params() const { return params_; }

    double idf(std::size_t doc_freq) const;

    /// Top-k by descending score, ties by ascending id. Documents without any
    /// query term are never returned.
    std::vector<ScoredDocument> retrieve(std::string_view query, std::size_t k) const;

private:
    std::vector<Document> docs_;
    std::vector<std::uint32_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

/// Reads line-delimited JSON {id, title, text}. Blank lines are skipped;
/// a malformed line raises CorpusError naming its line number.
std::vector<Document> load_corpus(const std::string& path);
CorpusIndex ingest_corpus(const std::string& path, Bm25Params params = {});

void save_index(const CorpusIndex& index, const std::string& path);
CorpusIndex load_index(const std::string& path);

class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<Document> search(std::string_view query, std::size_t k) = 0;
};

class LocalRetriever final : public Retriever {
public:
    explicit LocalRetriever(const CorpusIndex& index) : index_(index) {}
    std::vector<Document> search(std::string_view query, std::size_t k) override;

private:
    const CorpusIndex& index_;
};

/// Wire contract: POST {query, k} -> {documents: [{id, title, text}]}.
std::vector<Document> remote_retrieve(const Endpoint& endpoint, std::string_view query, std::size_t k,
                                      std::chrono::milliseconds timeout = std::chrono::seconds(30));

class RemoteRetriever final : public Retriever {
public:
    explicit RemoteRetriever(Endpoint endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30))
        : endpoint_(std::move(endpoint)), timeout_(timeout)
    {
    }
    std::vector<Document> search(std::string_view query, std::size_t k) override
    {
        return remote_retrieve(endpoint_, query, k, timeout_);
    }

private:
    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
};

}  // namespace recon

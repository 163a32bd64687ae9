// SPDX-License-Identifier: Apache-2.0
#include "recon/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_set>

#include "recon/text.hpp"

namespace recon {

nlohmann::json to_json(const Document& doc)
{
    return {{"id", doc.id}, {"title", doc.title}, {"text", doc.text}};
}

Document document_from_json(const nlohmann::json& j)
{
    Document d;
    d.id = j.at("id").get<std::string>();
    d.title = j.value("title", std::string{});
    d.text = j.at("text").get<std::string>();
    return d;
}

CorpusIndex CorpusIndex::build(std::vector<Document> docs, Bm25Params params)
{
    std::sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0 && docs[i].id == docs[i - 1].id)
            throw CorpusError("duplicate document id: " + docs[i].id);
        if (trim(docs[i].text).empty())
            throw CorpusError("document " + docs[i].id + " has empty text");
    }

    CorpusIndex index;
    index.params_ = params;
    index.docs_ = std::move(docs);
    index.doc_lengths_.reserve(index.docs_.size());

    double total = 0.0;
    for (std::uint32_t ord = 0; ord < index.docs_.size(); ++ord) {
        auto terms = lexical_terms(index.docs_[ord].text);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        total += static_cast<double>(terms.size());

        std::map<std::string, std::uint32_t> tf;
        for (auto& t : terms)
            ++tf[std::move(t)];
        for (auto& [term, freq] : tf)
            index.postings_[term].push_back(Posting{ord, freq});
    }
    index.avg_doc_length_ = index.docs_.empty() ? 0.0 : total / static_cast<double>(index.docs_.size());
    return index;
}

std::span<const Posting> CorpusIndex::postings(std::string_view term) const
{
    auto it = postings_.find(std::string(term));
    if (it == postings_.end())
        return {};
    return it->second;
}

double CorpusIndex::idf(std::size_t doc_freq) const
{
    const double n = static_cast<double>(docs_.size());
    const double df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<ScoredDocument> CorpusIndex::retrieve(std::string_view query, std::size_t k) const
{
    if (k == 0)
        throw std::invalid_argument("retrieve: k must be >= 1");

    // Distinct query terms in first-occurrence order; every document sums its
    // contributions in this same order.
    std::vector<std::string> terms;
    std::unordered_set<std::string> seen;
    for (auto& t : lexical_terms(query)) {
        if (seen.insert(t).second)
            terms.push_back(std::move(t));
    }

    std::vector<double> acc(docs_.size(), 0.0);
    std::vector<char> matched(docs_.size(), 0);
    for (const auto& term : terms) {
        auto list = postings(term);
        if (list.empty())
            continue;
        const double w = idf(list.size());
        for (const auto& p : list) {
            const double tf = p.freq;
            const double norm = 1.0 - params_.b + params_.b * doc_lengths_[p.doc] / avg_doc_length_;
            acc[p.doc] += w * (tf * (params_.k1 + 1.0)) / (tf + params_.k1 * norm);
            matched[p.doc] = 1;
        }
    }

    std::vector<std::uint32_t> hits;
    for (std::uint32_t d = 0; d < docs_.size(); ++d) {
        if (matched[d])
            hits.push_back(d);
    }
    auto better = [&](std::uint32_t a, std::uint32_t b) { return acc[a] != acc[b] ? acc[a] > acc[b] : a < b; };
    const auto n = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);

    std::vector<ScoredDocument> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(ScoredDocument{docs_[hits[i]], acc[hits[i]]});
    return out;
}

std::vector<Document> load_corpus(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw CorpusError("cannot open corpus file " + path);
    std::vector<Document> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            docs.push_back(document_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(path + ", line " + std::to_string(line_no) + ": malformed corpus line: " + e.what());
        }
    }
    return docs;
}

CorpusIndex ingest_corpus(const std::string& path, Bm25Params params)
{
    return CorpusIndex::build(load_corpus(path), params);
}

void save_index(const CorpusIndex& index, const std::string& path)
{
    nlohmann::json j;
    j["format"] = "recon-bm25-v1";
    j["k1"] = index.params().k1;
    j["b"] = index.params().b;
    j["num_docs"] = index.size();
    j["avg_doc_length"] = index.avg_doc_length();
    j["vocabulary_size"] = index.vocabulary_size();
    auto& docs = j["documents"] = nlohmann::json::array();
    for (const auto& d : index.documents())
        docs.push_back(to_json(d));
    std::ofstream out(path);
    if (!out)
        throw CorpusError("cannot write index " + path);
    out << j.dump() << '\n';
}

// The stored form keeps only the documents; postings are rebuilt on load,
// which is cheap at the corpus sizes this index is meant for.
CorpusIndex load_index(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw CorpusError("cannot open index " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError(path + ": " + e.what());
    }
    if (j.value("format", std::string{}) != "recon-bm25-v1")
        throw CorpusError(path + ": not a recon index");
    std::vector<Document> docs;
    for (const auto& d : j.at("documents"))
        docs.push_back(document_from_json(d));
    return CorpusIndex::build(std::move(docs), Bm25Params{j.at("k1").get<double>(), j.at("b").get<double>()});
}

std::vector<Document> LocalRetriever::search(std::string_view query, std::size_t k)
{
    std::vector<Document> out;
    for (auto& hit : index_.retrieve(query, k))
        out.push_back(std::move(hit.doc));
    return out;
}

std::vector<Document> remote_retrieve(const Endpoint& endpoint, std::string_view query, std::size_t k,
                                      std::chrono::milliseconds timeout)
{
    auto body = post_json(endpoint, {{"query", std::string(query)}, {"k", k}}, timeout);
    if (!body.is_object() || !body.contains("documents") || !body["documents"].is_array())
        throw SchemaError("retriever response lacks a 'documents' array", payload_excerpt(body.dump()));
    std::vector<Document> docs;
    for (const auto& d : body["documents"]) {
        try {
            docs.push_back(document_from_json(d));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("bad document in retriever response: ") + e.what(),
                              payload_excerpt(d.dump()));
        }
    }
    return docs;
}

}  // namespace recon

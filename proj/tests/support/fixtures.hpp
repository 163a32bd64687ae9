// SPDX-License-Identifier: Apache-2.0
// Shared oracles and generators for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "recon/relevance.hpp"
#include "recon/retrieval.hpp"
#include "recon/rl.hpp"
#include "recon/text.hpp"

#ifndef RECON_GOLDEN_DIR
#define RECON_GOLDEN_DIR "tests/golden"
#endif

namespace fixtures {

inline std::string golden_path(const std::string& name)
{
    return std::string(RECON_GOLDEN_DIR) + "/" + name;
}

inline std::string data_path(const std::string& name)
{
    return std::string(RECON_DATA_DIR) + "/" + name;
}

struct OracleHit {
    std::string id;
    double score;
};

/// BM25 scored document by document, from raw text, without any index.
inline std::vector<OracleHit> brute_force_bm25(const std::vector<recon::Document>& docs, const std::string& query,
                                               std::size_t k, double k1 = 1.2, double b = 0.75)
{
    std::vector<std::vector<std::string>> terms;
    double total = 0.0;
    for (const auto& d : docs) {
        terms.push_back(recon::lexical_terms(d.text));
        total += static_cast<double>(terms.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avg = total / n;

    std::vector<std::string> qterms;
    for (const auto& t : recon::lexical_terms(query)) {
        if (std::find(qterms.begin(), qterms.end(), t) == qterms.end())
            qterms.push_back(t);
    }

    std::vector<OracleHit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0.0;
        bool matched = false;
        for (const auto& q : qterms) {
            const double tf = static_cast<double>(std::count(terms[i].begin(), terms[i].end(), q));
            if (tf == 0.0)
                continue;
            matched = true;
            double df = 0.0;
            for (const auto& other : terms)
                df += std::find(other.begin(), other.end(), q) != other.end() ? 1.0 : 0.0;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double len = static_cast<double>(terms[i].size());
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
        }
        if (matched)
            hits.push_back({docs[i].id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& x, const OracleHit& y) {
        if (x.score != y.score)
            return x.score > y.score;
        return x.id < y.id;
    });
    if (hits.size() > k)
        hits.resize(k);
    return hits;
}

/// Small corpora over a tiny vocabulary so that shared terms and exact
/// score ties are common. Some documents duplicate earlier texts.
inline std::vector<recon::Document> random_corpus(std::mt19937_64& rng, std::size_t max_docs = 200)
{
    static const std::vector<std::string> vocab{"alpha", "beta",  "gamma", "delta", "eps",  "zeta", "eta",
                                                "theta", "iota",  "kappa", "lam",   "mu",   "nu",   "xi",
                                                "omi",   "pi",    "rho",   "sigma", "tau",  "ups"};
    std::uniform_int_distribution<std::size_t> ndocs(1, max_docs);
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
    std::bernoulli_distribution dup(0.15);

    const auto n = ndocs(rng);
    std::vector<recon::Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        if (!docs.empty() && dup(rng)) {
            text = docs[std::uniform_int_distribution<std::size_t>(0, docs.size() - 1)(rng)].text;
        } else {
            const auto l = len(rng);
            for (std::size_t w = 0; w < l; ++w)
                text += (w ? " " : "") + vocab[word(rng)];
        }
        char id[16];
        std::snprintf(id, sizeof id, "doc%04zu", (i * 7919) % 10007);
        docs.push_back({id, "t" + std::to_string(i), text});
    }
    return docs;
}

inline std::string random_query(std::mt19937_64& rng)
{
    static const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps",   "zeta", "eta",
                                                "theta", "iota", "kappa", "lam",   "mu",    "nu",   "xi",
                                                "omi",   "pi",   "rho",   "sigma", "tau",   "ups",  "absent"};
    std::uniform_int_distribution<std::size_t> len(1, 4);
    std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1);
    std::string q;
    const auto l = len(rng);
    for (std::size_t i = 0; i < l; ++i)
        q += (i ? " " : "") + vocab[word(rng)];
    return q;
}

/// Relevance examples where the labelled passage contains every query
/// term and the distractors contain none of them.
inline std::vector<recon::RelevanceExample> separable_relevance(std::mt19937_64& rng, std::size_t count)
{
    std::vector<std::string> vocab;
    for (int i = 0; i < 60; ++i)
        vocab.push_back("w" + std::to_string(i));
    std::vector<recon::RelevanceExample> out;
    for (std::size_t n = 0; n < count; ++n) {
        auto shuffled = vocab;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const std::vector<std::string> query(shuffled.begin(), shuffled.begin() + 3);
        const std::vector<std::string> rest(shuffled.begin() + 3, shuffled.end());
        std::uniform_int_distribution<std::size_t> pick(0, rest.size() - 1);
        const auto label = std::uniform_int_distribution<std::size_t>(0, recon::kCandidatesPerQuery - 1)(rng);

        recon::RelevanceExample ex;
        for (const auto& q : query)
            ex.query += (ex.query.empty() ? "" : " ") + q;
        for (std::size_t i = 0; i < recon::kCandidatesPerQuery; ++i) {
            std::vector<std::string> words;
            if (i == label)
                words = query;
            while (words.size() < 7)
                words.push_back(rest[pick(rng)]);
            std::shuffle(words.begin(), words.end(), rng);
            std::string p;
            for (const auto& w : words)
                p += (p.empty() ? "" : " ") + w;
            ex.passages.push_back(p);
        }
        ex.label = label;
        out.push_back(std::move(ex));
    }
    return out;
}

/// Random token-aligned PPO data plus matching current-policy outputs.
struct RandomBatch {
    std::vector<recon::PPOSequence> sequences;
    std::vector<recon::SequenceOutputs> outputs;
};

inline RandomBatch random_ppo_batch(std::mt19937_64& rng, std::size_t max_sequences = 4, std::size_t max_len = 8,
                                    std::size_t actions = 3)
{
    std::uniform_int_distribution<std::size_t> nseq(1, max_sequences);
    std::uniform_int_distribution<std::size_t> len(1, max_len);
    std::uniform_int_distribution<int> act(0, static_cast<int>(actions) - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    RandomBatch out;
    const auto s = nseq(rng);
    for (std::size_t i = 0; i < s; ++i) {
        const auto n = len(rng);
        recon::PPOSequence seq;
        recon::SequenceOutputs cur;
        for (std::size_t t = 0; t < n; ++t) {
            seq.mask.push_back(coin(rng) ? 1 : 0);
            std::vector<double> z(actions);
            for (auto& v : z)
                v = normal(rng);
            seq.action.push_back(act(rng));
            seq.logprob_old.push_back(recon::log_softmax_at(z, static_cast<std::size_t>(seq.action.back())) +
                                      0.3 * normal(rng));
            seq.logprob_ref.push_back(seq.logprob_old.back() + 0.1 * normal(rng));
            seq.value_old.push_back(normal(rng));
            seq.reward.push_back(0.0);
            seq.advantage.push_back(normal(rng));
            seq.return_target.push_back(normal(rng));
            cur.logits.push_back(std::move(z));
            cur.values.push_back(seq.value_old.back() + 0.8 * normal(rng));
        }
        seq.mask[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1;
        out.sequences.push_back(std::move(seq));
        out.outputs.push_back(std::move(cur));
    }
    return out;
}

/// Relative error. Below magnitude 1e-4 the difference is scaled by 1e-4
/// instead, so an exact zero against round-off noise still passes.
inline double rel_error(double analytic, double numeric)
{
    return std::abs(analytic - numeric) / std::max({1e-4, std::abs(analytic), std::abs(numeric)});
}

}  // namespace fixtures

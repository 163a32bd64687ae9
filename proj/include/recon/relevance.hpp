// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace recon {

inline constexpr std::size_t kCandidatesPerQuery = 10;

struct RelevanceExample {
    std::string query;
    std::vector<std::string> passages;  // exactly kCandidatesPerQuery
    std::optional<std::size_t> label;
};

/// Reads line-delimited JSON {query, passages, label}. Records with a null
/// label are dropped; `dropped` receives how many.
std::vector<RelevanceExample> load_relevance_dataset(const std::string& path, std::size_t* dropped = nullptr);

/// Sorted by index, no duplicate indices.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

struct RelevanceModel {
    std::vector<double> weights;
    double bias = 0.0;

    explicit RelevanceModel(std::size_t feature_dim = std::size_t{1} << 16);
    std::size_t feature_dim() const { return weights.size(); }
    double score(const SparseVector& features) const;
};

/// Hashed query/passage pair features: per shared term an overlap indicator
/// and a term-frequency product, the shared fraction of distinct query
/// terms, and the query/(query+passage) length ratio. `feature_dim` must be
/// a power of two.
SparseVector featurize(std::string_view query, std::string_view passage, std::size_t feature_dim = std::size_t{1} << 16);

struct RelevanceLoss {
    double loss = 0.0;
    std::vector<double> grad_weights;
    double grad_bias = 0.0;
};

/// Listwise softmax cross-entropy over the candidates against the labelled
/// passage, with its exact gradient.
RelevanceLoss relevance_loss(const RelevanceModel& model, const RelevanceExample& example);

struct RelevanceTrainConfig {
    double lr = 0.5;
    int epochs = 20;
    std::uint64_t seed = 1;
};

struct RelevanceTrainResult {
    RelevanceModel model;
    std::vector<double> epoch_mean_loss;
};

RelevanceTrainResult train_relevance(std::span<const RelevanceExample> dataset, const RelevanceTrainConfig& config,
                                     std::size_t feature_dim = std::size_t{1} << 16);

struct CandidateScores {
    std::vector<double> scores;
    std::size_t best = 0;  // lowest index among ties
};

CandidateScores score_candidates(const RelevanceModel& model, std::string_view query,
                                 std::span<const std::string> passages);

void save_relevance_model(const RelevanceModel& model, const std::string& path);
RelevanceModel load_relevance_model(const std::string& path);

}  // namespace recon

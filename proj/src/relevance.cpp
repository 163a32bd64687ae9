// SPDX-License-Identifier: Apache-2.0
#include "recon/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "recon/text.hpp"

namespace recon {
namespace {

std::uint64_t fnv1a(std::string_view prefix, std::string_view text)
{
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    mix(prefix);
    mix(text);
    return h;
}

std::uint32_t slot(std::string_view prefix, std::string_view term, std::size_t dim)
{
    return static_cast<std::uint32_t>(fnv1a(prefix, term) & (dim - 1));
}

std::vector<double> candidate_scores(const RelevanceModel& model, std::string_view query,
                                     std::span<const std::string> passages, std::vector<SparseVector>* features)
{
    std::vector<double> z;
    z.reserve(passages.size());
    for (const auto& p : passages) {
        auto f = featurize(query, p, model.feature_dim());
        z.push_back(model.score(f));
        if (features)
            features->push_back(std::move(f));
    }
    return z;
}

struct SoftmaxCE {
    double loss;
    std::vector<double> coeff;  // d loss / d z_j = softmax_j - onehot_j
};

SoftmaxCE softmax_ce(const std::vector<double>& z, std::size_t label)
{
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z)
        sum += std::exp(v - zmax);
    const double log_norm = zmax + std::log(sum);
    SoftmaxCE out{log_norm - z[label], {}};
    out.coeff.reserve(z.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        out.coeff.push_back(std::exp(z[j] - log_norm) - (j == label ? 1.0 : 0.0));
    return out;
}

}  // namespace

RelevanceModel::RelevanceModel(std::size_t feature_dim) : weights(feature_dim, 0.0)
{
    if (feature_dim == 0 || (feature_dim & (feature_dim - 1)) != 0)
        throw std::invalid_argument("feature_dim must be a power of two");
}

double RelevanceModel::score(const SparseVector& features) const
{
    double z = bias;
    for (const auto& [i, v] : features)
        z += weights[i] * v;
    return z;
}

SparseVector featurize(std::string_view query, std::string_view passage, std::size_t feature_dim)
{
    if (feature_dim == 0 || (feature_dim & (feature_dim - 1)) != 0)
        throw std::invalid_argument("feature_dim must be a power of two");

    auto q_terms = lexical_terms(query);
    auto p_terms = lexical_terms(passage);
    std::map<std::string, int> q_tf;
    std::map<std::string, int> p_tf;
    for (const auto& t : q_terms)
        ++q_tf[t];
    for (const auto& t : p_terms)
        ++p_tf[t];

    std::map<std::uint32_t, double> acc;
    std::size_t shared = 0;
    for (const auto& [term, qf] : q_tf) {
        auto it = p_tf.find(term);
        if (it == p_tf.end())
            continue;
        ++shared;
        acc[slot("ov:", term, feature_dim)] += 1.0;
        acc[slot("tf:", term, feature_dim)] += static_cast<double>(qf) * it->second;
    }
    if (shared > 0)
        acc[slot("agg:", "overlap_fraction", feature_dim)] += static_cast<double>(shared) / q_tf.size();
    if (!q_terms.empty() || !p_terms.empty()) {
        acc[slot("agg:", "length_ratio", feature_dim)] +=
            static_cast<double>(q_terms.size()) / static_cast<double>(q_terms.size() + p_terms.size());
    }

    SparseVector out;
    out.reserve(acc.size());
    for (const auto& [i, v] : acc) {
        if (v != 0.0)
            out.emplace_back(i, v);
    }
    return out;
}

RelevanceLoss relevance_loss(const RelevanceModel& model, const RelevanceExample& example)
{
    if (!example.label)
        throw std::invalid_argument("relevance_loss needs a labelled example");
    if (example.passages.empty() || *example.label >= example.passages.size())
        throw std::invalid_argument("label does not index a passage");

    std::vector<SparseVector> features;
    auto z = candidate_scores(model, example.query, example.passages, &features);
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (!std::isfinite(z[j]))
            throw std::domain_error("non-finite score for passage " + std::to_string(j));
    }

    auto ce = softmax_ce(z, *example.label);
    RelevanceLoss out;
    out.loss = ce.loss;
    out.grad_weights.assign(model.feature_dim(), 0.0);
    for (std::size_t j = 0; j < z.size(); ++j) {
        for (const auto& [i, v] : features[j])
            out.grad_weights[i] += ce.coeff[j] * v;
        out.grad_bias += ce.coeff[j];
    }
    return out;
}

RelevanceTrainResult train_relevance(std::span<const RelevanceExample> dataset, const RelevanceTrainConfig& config,
                                     std::size_t feature_dim)
{
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].label)
            usable.push_back(i);
    }
    if (usable.empty())
        throw std::invalid_argument("relevance dataset is empty after dropping unlabelled records");

    RelevanceTrainResult result{RelevanceModel(feature_dim), {}};
    auto& model = result.model;
    std::mt19937_64 rng(config.seed);
    std::size_t step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(usable.begin(), usable.end(), rng);
        double total = 0.0;
        for (auto idx : usable) {
            const auto& ex = dataset[idx];
            // Sparse update: only features of this example's candidates move.
            std::vector<SparseVector> features;
            auto z = candidate_scores(model, ex.query, ex.passages, &features);
            auto ce = softmax_ce(z, *ex.label);
            ++step;
            if (!std::isfinite(ce.loss))
                throw std::runtime_error("relevance training diverged at step " + std::to_string(step));
            total += ce.loss;
            for (std::size_t j = 0; j < z.size(); ++j) {
                for (const auto& [i, v] : features[j])
                    model.weights[i] -= config.lr * ce.coeff[j] * v;
                model.bias -= config.lr * ce.coeff[j];
            }
        }
        result.epoch_mean_loss.push_back(total / static_cast<double>(usable.size()));
    }
    return result;
}

CandidateScores score_candidates(const RelevanceModel& model, std::string_view query,
                                 std::span<const std::string> passages)
{
    if (passages.empty())
        throw std::invalid_argument("score_candidates needs at least one passage");
    CandidateScores out;
    out.scores = candidate_scores(model, query, passages, nullptr);
    out.best = static_cast<std::size_t>(std::max_element(out.scores.begin(), out.scores.end()) - out.scores.begin());
    return out;
}

std::vector<RelevanceExample> load_relevance_dataset(const std::string& path, std::size_t* dropped)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open relevance dataset " + path);
    std::vector<RelevanceExample> out;
    std::size_t skipped = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto where = path + ", line " + std::to_string(line_no) + ": ";
        RelevanceExample ex;
        try {
            auto j = nlohmann::json::parse(line);
            ex.query = j.at("query").get<std::string>();
            ex.passages = j.at("passages").get<std::vector<std::string>>();
            if (auto it = j.find("label"); it != j.end() && !it->is_null())
                ex.label = it->get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(where + e.what());
        }
        if (ex.passages.size() != kCandidatesPerQuery)
            throw std::runtime_error(where + "expected " + std::to_string(kCandidatesPerQuery) + " passages, got " +
                                     std::to_string(ex.passages.size()));
        if (ex.label && *ex.label >= ex.passages.size())
            throw std::runtime_error(where + "label out of range");
        if (!ex.label) {
            ++skipped;
            continue;
        }
        out.push_back(std::move(ex));
    }
    if (dropped)
        *dropped = skipped;
    return out;
}

void save_relevance_model(const RelevanceModel& model, const std::string& path)
{
    nlohmann::json j;
    j["feature_dim"] = model.feature_dim();
    j["bias"] = model.bias;
    auto& w = j["weights"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        if (model.weights[i] != 0.0)
            w.push_back({i, model.weights[i]});
    }
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write model " + path);
    out << j.dump() << '\n';
}

RelevanceModel load_relevance_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open model " + path);
    auto j = nlohmann::json::parse(in);
    RelevanceModel model(j.at("feature_dim").get<std::size_t>());
    model.bias = j.at("bias").get<double>();
    for (const auto& entry : j.at("weights"))
        model.weights.at(entry.at(0).get<std::size_t>()) = entry.at(1).get<double>();
    return model;
}

}  // namespace recon

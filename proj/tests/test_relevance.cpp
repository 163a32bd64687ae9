// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "fixtures.hpp"
#include "recon/relevance.hpp"

using namespace recon;

namespace {

double accuracy(const RelevanceModel& m, const std::vector<RelevanceExample>& xs)
{
    std::size_t hit = 0;
    for (const auto& x : xs)
        hit += score_candidates(m, x.query, x.passages).best == *x.label ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(xs.size());
}

}  // namespace

TEST_SUITE("relevance") {

TEST_CASE("zero model loss is ln 10")
{
    std::mt19937_64 rng(1);
    const RelevanceModel zero(1 << 10);
    for (const auto& ex : fixtures::separable_relevance(rng, 20))
        CHECK(std::abs(relevance_loss(zero, ex).loss - std::log(10.0)) < 1e-9);
}

TEST_CASE("features")
{
    const auto f = featurize("red car", "a red red car", 1 << 12);
    CHECK_FALSE(f.empty());
    for (std::size_t i = 1; i < f.size(); ++i)
        CHECK(f[i - 1].first < f[i].first);
    for (auto [idx, v] : f)
        CHECK(idx < (1u << 12));
    CHECK_THROWS(featurize("a", "b", 1000));
    CHECK_THROWS(RelevanceModel(100));
}

TEST_CASE("relevance_loss gradient matches central differences")
{
    std::mt19937_64 rng(5);
    const std::size_t dim = 1 << 8;
    const double h = 1e-6;
    for (const auto& ex : fixtures::separable_relevance(rng, 10)) {
        RelevanceModel m(dim);
        std::normal_distribution<double> nd(0.0, 0.5);
        for (auto& w : m.weights)
            w = nd(rng);
        m.bias = nd(rng);
        const auto g = relevance_loss(m, ex);
        for (std::size_t i = 0; i < dim; ++i) {
            auto up = m, down = m;
            up.weights[i] += h;
            down.weights[i] -= h;
            const double num = (relevance_loss(up, ex).loss - relevance_loss(down, ex).loss) / (2 * h);
            CHECK(fixtures::rel_error(g.grad_weights[i], num) < 1e-4);
        }
        auto up = m, down = m;
        up.bias += h;
        down.bias -= h;
        CHECK(fixtures::rel_error(g.grad_bias, (relevance_loss(up, ex).loss - relevance_loss(down, ex).loss) / (2 * h)) <
              1e-4);
    }
}

TEST_CASE("training on the separable fixture")
{
    std::mt19937_64 rng(1);
    const auto train = fixtures::separable_relevance(rng, 200);
    const auto held = fixtures::separable_relevance(rng, 100);
    const auto result = train_relevance(train, RelevanceTrainConfig{});
    REQUIRE(result.epoch_mean_loss.size() == 20);
    CHECK(result.epoch_mean_loss.back() < 0.1);
    CHECK(result.epoch_mean_loss.back() < result.epoch_mean_loss.front());
    CHECK(accuracy(result.model, held) >= 0.95);

    const auto again = train_relevance(train, RelevanceTrainConfig{});
    CHECK(again.epoch_mean_loss == result.epoch_mean_loss);
}

TEST_CASE("ties pick the lowest index")
{
    const RelevanceModel zero(1 << 8);
    const std::vector<std::string> passages(10, "same text");
    CHECK(score_candidates(zero, "q", passages).best == 0);
}

TEST_CASE("dataset loading drops unlabeled records")
{
    std::size_t dropped = 0;
    const auto data = load_relevance_dataset(fixtures::data_path("relevance_sample.jsonl"), &dropped);
    CHECK(dropped == 1);
    CHECK(data.size() == 40);

    const auto bad = (std::filesystem::temp_directory_path() / "recon_rel_bad.jsonl").string();
    std::ofstream(bad) << R"({"query":"q","passages":["a","b"],"label":0})" << "\n";
    CHECK_THROWS(load_relevance_dataset(bad));
}

TEST_CASE("model save and load round trip")
{
    std::mt19937_64 rng(3);
    const auto train = fixtures::separable_relevance(rng, 30);
    const auto m = train_relevance(train, {0.5, 3, 1}, 1 << 10).model;
    const auto path = (std::filesystem::temp_directory_path() / "recon_rel_model.json").string();
    save_relevance_model(m, path);
    const auto back = load_relevance_model(path);
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
}

TEST_CASE("non-finite scores are reported")
{
    std::mt19937_64 rng(3);
    const auto ex = fixtures::separable_relevance(rng, 1).front();
    RelevanceModel m(1 << 10);
    m.bias = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(relevance_loss(m, ex), std::domain_error);
}

}

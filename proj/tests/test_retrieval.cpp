// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "mock_server.hpp"
#include "recon/retrieval.hpp"

using namespace recon;

TEST_SUITE("retrieval") {

TEST_CASE("top-k equals brute-force BM25 on random corpora with ties")
{
    std::mt19937_64 rng(2024);
    std::size_t tie_queries = 0;
    for (int c = 0; c < 100; ++c) {
        const auto docs = fixtures::random_corpus(rng);
        const auto index = CorpusIndex::build(docs);
        for (int q = 0; q < 10; ++q) {
            const auto query = fixtures::random_query(rng);
            const std::size_t k = 1 + rng() % 10;
            const auto got = index.retrieve(query, k);
            const auto want = fixtures::brute_force_bm25(docs, query, k);
            CAPTURE(query);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].doc.id == want[i].id);
                CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
                if (i > 0 && want[i].score == want[i - 1].score)
                    ++tie_queries;
            }
        }
    }
    CHECK(tie_queries > 0);
}

TEST_CASE("idf and a hand-computed score")
{
    // two docs: "a b" and "a a c"; avg length 2.5
    const auto index = CorpusIndex::build({{"x", "", "a b"}, {"y", "", "a a c"}});
    CHECK(index.idf(2) == doctest::Approx(std::log(1.0 + 0.5 / 2.5)));
    CHECK(index.idf(1) == doctest::Approx(std::log(1.0 + 1.5 / 1.5)));
    const auto hits = index.retrieve("c", 5);
    REQUIRE(hits.size() == 1);
    const double expected = std::log(2.0) * 1 * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 3 / 2.5));
    CHECK(hits[0].score == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("documents without query terms are never returned")
{
    const auto index = CorpusIndex::build({{"x", "", "a b"}, {"y", "", "c d"}});
    CHECK(index.retrieve("zzz", 5).empty());
    CHECK(index.retrieve("a", 5).size() == 1);
    CHECK_THROWS(index.retrieve("a", 0));
}

TEST_CASE("corpus validation")
{
    CHECK_THROWS_AS(CorpusIndex::build({{"x", "", "a"}, {"x", "", "b"}}), CorpusError);
    CHECK_THROWS_AS(CorpusIndex::build({{"x", "", "   "}}), CorpusError);

    const auto dir = std::filesystem::temp_directory_path() / "recon_retrieval_test";
    std::filesystem::create_directories(dir);
    const auto bad = (dir / "bad.jsonl").string();
    std::ofstream(bad) << R"({"id":"a","title":"t","text":"x"})" << "\n\n" << "{not json\n";
    try {
        load_corpus(bad);
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("index save and load round trip")
{
    const auto docs = load_corpus(fixtures::data_path("mini_corpus.jsonl"));
    const auto index = CorpusIndex::build(docs);
    const auto path = (std::filesystem::temp_directory_path() / "recon_index_roundtrip.json").string();
    save_index(index, path);
    const auto loaded = load_index(path);
    CHECK(loaded.size() == index.size());
    for (const auto* q : {"Marie Curie born", "river Poland", "Eiffel"}) {
        const auto a = index.retrieve(q, 5);
        const auto b = loaded.retrieve(q, 5);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].doc == b[i].doc);
            CHECK(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("remote retriever wire contract")
{
    nlohmann::json seen;
    fixtures::MockServer server("/retrieve", fixtures::MockServer::json_reply([&](const nlohmann::json& req) {
        seen = req;
        return nlohmann::json{{"documents", {{{"id", "d1"}, {"title", "T"}, {"text", "body"}}}}};
    }));
    RemoteRetriever r(server.endpoint());
    const auto docs = r.search("capital of France", 3);
    CHECK(seen["query"] == "capital of France");
    CHECK(seen["k"] == 3);
    REQUIRE(docs.size() == 1);
    CHECK(docs[0] == Document{"d1", "T", "body"});
}

TEST_CASE("remote retriever errors are typed")
{
    fixtures::MockServer bad_schema("/r", fixtures::MockServer::json_reply([](const nlohmann::json&) {
        return nlohmann::json{{"docs", 1}};
    }));
    CHECK_THROWS_AS(remote_retrieve(bad_schema.endpoint(), "q", 1), SchemaError);

    fixtures::MockServer failing("/r", [](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
        res.set_content("overloaded", "text/plain");
    });
    try {
        remote_retrieve(failing.endpoint(), "q", 1);
        FAIL("expected HttpStatusError");
    } catch (const HttpStatusError& e) {
        CHECK(e.status() == 503);
    }

    CHECK_THROWS_AS(remote_retrieve(fixtures::dead_endpoint(), "q", 1, std::chrono::milliseconds(500)),
                    TransportError);
}

}

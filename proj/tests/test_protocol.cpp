// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "recon/protocol.hpp"
#include "recon/text.hpp"

using namespace recon;

namespace {

// Position scan: the first closing tag in the text decides which pair wins.
Action oracle_parse(const std::string& s)
{
    struct Cand {
        std::size_t close;
        bool search;
        std::string inner;
    };
    std::vector<Cand> cands;
    for (bool search : {true, false}) {
        const std::string open = search ? "<search>" : "<answer>";
        const std::string close = search ? "</search>" : "</answer>";
        auto o = s.find(open);
        if (o == std::string::npos)
            continue;
        auto c = s.find(close, o + open.size());
        if (c == std::string::npos)
            continue;
        cands.push_back({c, search, trim(s.substr(o + open.size(), c - o - open.size()))});
    }
    if (cands.empty())
        return InvalidAction{};
    const auto& best = cands[0].close < (cands.size() > 1 ? cands[1].close : std::string::npos) ? cands[0] : cands[1];
    if (best.search)
        return SearchAction{best.inner};
    return AnswerAction{best.inner};
}

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("parse_segment grammar examples")
{
    CHECK(parse_segment("I will look it up. <search> capital of France </search>") ==
          Action{SearchAction{"capital of France"}});
    CHECK(parse_segment("<answer> Paris </answer>") == Action{AnswerAction{"Paris"}});
    CHECK(parse_segment("let me think about this") == Action{InvalidAction{}});
    CHECK(parse_segment("<search> a </search> then <answer> b </answer>") == Action{SearchAction{"a"}});
    CHECK(parse_segment("<answer> b </answer> <search> a </search>") == Action{AnswerAction{"b"}});
    CHECK(parse_segment("") == Action{InvalidAction{}});
    CHECK(parse_segment("<search> unclosed") == Action{InvalidAction{}});
    CHECK(parse_segment("<SEARCH> x </SEARCH>") == Action{InvalidAction{}});
    CHECK(parse_segment("<search></search>") == Action{SearchAction{""}});
}

TEST_CASE("parse_segment agrees with the position-scan oracle on random tag soup")
{
    const std::vector<std::string> pieces{"<search>", "</search>", "<answer>", "</answer>", " q ", "x", "  ",
                                          "<information>", "word"};
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::uniform_int_distribution<int> len(0, 10);
    for (int i = 0; i < 5000; ++i) {
        std::string s;
        for (int n = len(rng); n > 0; --n)
            s += pieces[pick(rng)];
        CAPTURE(s);
        CHECK(parse_segment(s) == oracle_parse(s));
        CHECK(parse_segment(s) == parse_segment(s));
    }
}

TEST_CASE("search round trip for tag-free queries")
{
    std::mt19937_64 rng(3);
    const std::string alphabet = "abc XYZ 019 \t\n.,?";
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int i = 0; i < 1000; ++i) {
        std::string q;
        for (int n = static_cast<int>(rng() % 20); n > 0; --n)
            q += alphabet[pick(rng)];
        CHECK(parse_segment("<search>" + q + "</search>") == Action{SearchAction{trim(q)}});
    }
}

TEST_CASE("scan_stop examples")
{
    StopScanner s;
    CHECK_FALSE(s.feed("<ans"));
    CHECK_FALSE(s.feed("wer> x </ans"));
    auto hit = s.feed("wer>");
    REQUIRE(hit);
    CHECK(hit->reason == StopReason::CloseAnswer);
    CHECK(hit->offset == std::string("<answer> x </answer>").size());

    StopScanner none;
    none.feed("no tags here");
    CHECK(none.finish() == StopHit{StopReason::EndOfSequence, 12});

    const std::string text = "a </search> b </answer>";
    CHECK(scan_stop(text) == StopHit{StopReason::CloseSearch, text.find("</search>") + 9});
    CHECK(scan_stop("done<eos>tail") == StopHit{StopReason::EndOfSequence, 9});
}

TEST_CASE("scan_stop is invariant under chunking")
{
    const std::vector<std::string> pieces{"</search>", "</answer>", "<eos>", "</", "search>", "<", "/answer", ">",
                                          "text ", "e", "<eo", "s>"};
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    for (int i = 0; i < 3000; ++i) {
        std::string s;
        for (int n = static_cast<int>(rng() % 8); n > 0; --n)
            s += pieces[pick(rng)];
        const auto expected = scan_stop(s);

        // oracle: earliest end offset among all stop tokens in the full buffer
        std::size_t best = std::string::npos;
        StopReason reason = StopReason::EndOfSequence;
        for (auto [tok, r] : {std::pair{"</search>", StopReason::CloseSearch},
                              std::pair{"</answer>", StopReason::CloseAnswer},
                              std::pair{"<eos>", StopReason::EndOfSequence}}) {
            auto p = s.find(tok);
            if (p != std::string::npos && p + std::string(tok).size() < best) {
                best = p + std::string(tok).size();
                reason = r;
            }
        }
        CAPTURE(s);
        if (best == std::string::npos)
            CHECK(expected == StopHit{StopReason::EndOfSequence, s.size()});
        else
            CHECK(expected == StopHit{reason, best});

        StopScanner sc;
        std::size_t pos = 0;
        while (pos < s.size()) {
            const auto step = 1 + rng() % 4;
            sc.feed(std::string_view(s).substr(pos, step));
            pos += step;
        }
        CHECK(sc.finish() == expected);
    }
}

TEST_CASE("wrap_information")
{
    CHECK(wrap_information("Paris is the capital.") == "<information> Paris is the capital. </information>");
    CHECK(wrap_information("") == "<information> No relevant information found. </information>");
    CHECK(wrap_information("a\nb") == "<information> a\nb </information>");
}

TEST_CASE("rethink continuation is the literal sentence")
{
    CHECK(kRethinkText == "My action is not correct. Let me rethink.");
    CHECK(default_tokenizer().count(kRethinkText) == 8);
}

TEST_CASE("stop reason names round trip")
{
    for (auto r : {StopReason::CloseSearch, StopReason::CloseAnswer, StopReason::EndOfSequence,
                   StopReason::BudgetExhausted})
        CHECK(stop_reason_from_string(to_string(r)) == r);
    CHECK_FALSE(stop_reason_from_string("bogus"));
}

}

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "mock_server.hpp"
#include "recon/rollout.hpp"
#include "rollout_fixture.hpp"

using namespace recon;

namespace {

struct TraceRig {
    CorpusIndex index = CorpusIndex::build(fixtures::france_docs());
    LocalRetriever retriever{index};
    fixtures::IdentityCondenser condenser;
    RolloutContext ctx{retriever, condenser, fixtures::kTraceTemplate};
};

class ThrowingRetriever final : public Retriever {
public:
    std::vector<Document> search(std::string_view, std::size_t) override { throw std::runtime_error("index offline"); }
};

class LambdaBackend final : public GenerationBackend {
public:
    explicit LambdaBackend(std::function<GenerationResponse(const GenerationRequest&)> fn) : fn_(std::move(fn)) {}
    GenerationResponse generate(const GenerationRequest& r) override { return fn_(r); }

private:
    std::function<GenerationResponse(const GenerationRequest&)> fn_;
};

}  // namespace

TEST_SUITE("rollout") {

TEST_CASE("hand-traced rollout over every branch")
{
    TraceRig rig;
    ScriptedBackend script(fixtures::trace_script());
    fixtures::RecordingBackend policy(script);
    const auto t = run_rollout(fixtures::kTraceQuestion, policy, rig.ctx, RolloutConfig{});

    const auto expected = fixtures::trace_expected();
    REQUIRE(t.segments.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CAPTURE(i);
        CHECK(t.segments[i].kind == expected[i].kind);
        CHECK(t.segments[i].text == expected[i].text);
        CHECK(t.segments[i].token_count == expected[i].tokens);
    }
    CHECK(t.final_answer == std::optional<std::string>("Paris"));
    CHECK(t.turns_used == 2);
    CHECK(t.stop == StopReason::CloseAnswer);
    CHECK_FALSE(t.failed);

    auto j = to_json(t);
    j["wall_clock_ms"] = 0.0;
    CHECK(j.dump() == fixtures::kTraceJson);

    REQUIRE(policy.requests.size() == 4);
    CHECK(policy.requests[0].prompt == "Solve it.\nQuestion: What is the capital of France?");
    std::string prompt = policy.requests[0].prompt;
    for (std::size_t i = 0; i < 6; ++i)
        prompt += "\n" + expected[i].text;
    CHECK(policy.requests[3].prompt == prompt);
    CHECK(policy.requests[0].stop == std::vector<std::string>{"</search>", "</answer>"});
    CHECK(policy.requests[0].max_tokens == 500);
}

TEST_CASE("budget exhaustion with repeated invalid actions")
{
    TraceRig rig;
    ScriptedBackend policy({"thinking", "still thinking"});
    RolloutConfig cfg;
    cfg.budget = 2;
    const auto t = run_rollout("q?", policy, rig.ctx, cfg);
    REQUIRE(t.segments.size() == 4);
    CHECK(t.count(SegmentKind::Rethink) == 2);
    CHECK(t.segments[1].text == kRethinkText);
    CHECK(t.segments[3].text == kRethinkText);
    CHECK_FALSE(t.final_answer);
    CHECK(t.stop == StopReason::BudgetExhausted);
    CHECK(t.turns_used == 0);
}

TEST_CASE("search then answer with one retrieved document")
{
    auto index = CorpusIndex::build({{"only", "T", "Paris is the capital of France."}});
    LocalRetriever retriever(index);
    fixtures::IdentityCondenser condenser;
    RolloutContext ctx{retriever, condenser};
    ScriptedBackend policy({"<search> q1 capital </search>", "<answer> A </answer>"});
    const auto t = run_rollout("x?", policy, ctx, RolloutConfig{});
    REQUIRE(t.segments.size() == 3);
    CHECK(t.segments[0].kind == SegmentKind::PolicyText);
    CHECK(t.segments[1].kind == SegmentKind::Information);
    CHECK(t.segments[2].kind == SegmentKind::PolicyText);
    CHECK(t.turns_used == 1);
    CHECK(t.final_answer == std::optional<std::string>("A"));
}

TEST_CASE("uncondensed wiring injects raw documents in rank order")
{
    TraceRig rig;
    ScriptedBackend policy({"<search> capital of France </search>", "<answer> Paris </answer>"});
    RolloutConfig cfg;
    cfg.condense = false;
    const auto t = run_rollout(fixtures::kTraceQuestion, policy, rig.ctx, cfg);
    REQUIRE(t.segments.size() == 3);
    CHECK(t.segments[1].text == "<information> Doc 1 (Title: Paris) Paris is the capital of France.\n"
                                "Doc 2 (Title: Lyon) Lyon is a city in France. </information>");
}

TEST_CASE("raw condenser and disabled condensation coincide")
{
    TraceRig rig;
    RawCondenser raw;
    RolloutContext raw_ctx{rig.retriever, raw, fixtures::kTraceTemplate};
    const std::vector<std::string> script{"<search> France city </search>", "<search> capital </search>",
                                          "<answer> Paris </answer>"};
    RolloutConfig on;
    RolloutConfig off;
    off.condense = false;
    ScriptedBackend a(script);
    ScriptedBackend b(script);
    const auto with_raw = run_rollout("q?", a, raw_ctx, on);
    const auto disabled = run_rollout("q?", b, rig.ctx, off);
    CHECK(with_raw.segments == disabled.segments);
}

TEST_CASE("rollouts are deterministic")
{
    TraceRig rig;
    ScriptedBackend a(fixtures::trace_script());
    ScriptedBackend b(fixtures::trace_script());
    const auto x = run_rollout(fixtures::kTraceQuestion, a, rig.ctx, RolloutConfig{});
    const auto y = run_rollout(fixtures::kTraceQuestion, b, rig.ctx, RolloutConfig{});
    CHECK(x.segments == y.segments);
    CHECK(x.notes == y.notes);
}

TEST_CASE("trajectory invariants on random scripts")
{
    TraceRig rig;
    const std::vector<std::string> pool{"<search> capital </search>", "<search> nothing </search>", "idle",
                                        "<answer> Paris </answer>", "<search> France"};
    std::mt19937_64 rng(17);
    for (int i = 0; i < 300; ++i) {
        RolloutConfig cfg;
        cfg.budget = 1 + static_cast<int>(rng() % 5);
        std::vector<std::string> script;
        for (int n = 0; n < cfg.budget; ++n)
            script.push_back(pool[rng() % pool.size()]);
        ScriptedBackend policy(script);
        const auto t = run_rollout("q?", policy, rig.ctx, cfg);
        REQUIRE_FALSE(t.failed);
        CHECK(t.turns_used <= cfg.budget);
        CHECK(static_cast<int>(t.count(SegmentKind::Information)) == t.turns_used);
        bool answered = false;
        for (std::size_t s = 0; s < t.segments.size(); ++s) {
            if (t.segments[s].kind == SegmentKind::Information) {
                REQUIRE(s > 0);
                CHECK(t.segments[s - 1].kind == SegmentKind::PolicyText);
                CHECK(std::holds_alternative<SearchAction>(parse_segment(t.segments[s - 1].text)));
            }
            if (t.segments[s].kind == SegmentKind::PolicyText &&
                std::holds_alternative<AnswerAction>(parse_segment(t.segments[s].text)))
                answered = true;
        }
        CHECK(answered == t.final_answer.has_value());
        CHECK((t.stop == StopReason::CloseAnswer) == answered);
    }
}

TEST_CASE("backend failure keeps the partial trajectory")
{
    TraceRig rig;
    ScriptedBackend policy({"<search> capital </search>"});
    const auto t = run_rollout("q?", policy, rig.ctx, RolloutConfig{});
    CHECK(t.failed);
    CHECK(t.segments.size() == 2);
    CHECK(t.error.find("policy backend") != std::string::npos);

    ThrowingRetriever broken;
    RolloutContext ctx{broken, rig.condenser};
    ScriptedBackend p2({"<search> capital </search>"});
    const auto t2 = run_rollout("q?", p2, ctx, RolloutConfig{});
    CHECK(t2.failed);
    CHECK(t2.segments.size() == 1);

    ScriptedBackend p3({"<answer> x </answer>"});
    CHECK(run_rollout("  ", p3, rig.ctx, RolloutConfig{}).failed);
}

TEST_CASE("stripped stop strings are restored")
{
    TraceRig rig;
    int call = 0;
    LambdaBackend policy([&](const GenerationRequest&) {
        ++call;
        if (call == 1)
            return GenerationResponse{"<search> capital of France", "stop"};
        return GenerationResponse{"<answer> Paris", "stop"};
    });
    const auto t = run_rollout("q?", policy, rig.ctx, RolloutConfig{});
    CHECK(t.segments[0].text == "<search> capital of France</search>");
    CHECK(t.final_answer == std::optional<std::string>("Paris"));
    CHECK(t.notes.size() == 2);
}

TEST_CASE("a literal eos ends the emission")
{
    TraceRig rig;
    ScriptedBackend eos({"I give up<eos> <answer> x </answer>", "<answer> y </answer>"});
    const auto t = run_rollout("q?", eos, rig.ctx, RolloutConfig{});
    CHECK(t.segments[0].text == "I give up<eos>");
    CHECK(t.segments[1].kind == SegmentKind::Rethink);
    CHECK(t.final_answer == std::optional<std::string>("y"));
}

TEST_CASE("build_prompt")
{
    Trajectory t;
    t.question = "Q";
    CHECK(build_prompt(t, "T {question}", 100) == "T Q");
    t.segments.push_back({SegmentKind::PolicyText, "a b", 2});
    t.segments.push_back({SegmentKind::Information, "<information> c </information>", 3});
    CHECK(build_prompt(t, "T {question}", 100) == "T Q\na b\n<information> c </information>");
    CHECK_THROWS(build_prompt(t, "no placeholder", 100));

    // header 2 tokens + 4095 tokens of segments = 4097
    Trajectory big;
    big.question = "Q";
    big.segments.push_back({SegmentKind::PolicyText, "x", 4000});
    big.segments.push_back({SegmentKind::Information, "y", 94});
    CHECK_NOTHROW(build_prompt(big, "T {question}", 4096));
    big.segments.push_back({SegmentKind::PolicyText, "z", 1});
    try {
        build_prompt(big, "T {question}", 4096);
        FAIL("expected overflow");
    } catch (const PromptOverflow& e) {
        CHECK(e.segment() == std::optional<std::size_t>(2));
    }
    Trajectory header_only;
    header_only.question = "many words here";
    try {
        build_prompt(header_only, "{question}", 2);
        FAIL("expected overflow");
    } catch (const PromptOverflow& e) {
        CHECK_FALSE(e.segment());
    }
}

TEST_CASE("prompt overflow mid-rollout fails the trajectory")
{
    TraceRig rig;
    ScriptedBackend policy(fixtures::trace_script());
    RolloutConfig cfg;
    cfg.max_prompt_tokens = 12;
    const auto t = run_rollout(fixtures::kTraceQuestion, policy, rig.ctx, cfg);
    CHECK(t.failed);
    CHECK(t.error.find("overflow") != std::string::npos);
}

TEST_CASE("config validation")
{
    RolloutConfig c;
    c.budget = 0;
    CHECK_THROWS(c.validate());
    c = RolloutConfig{};
    c.top_k = 0;
    CHECK_THROWS(c.validate());
    c = RolloutConfig{};
    c.sampling.temperature = 0.0;
    CHECK_THROWS(c.validate());
    const auto base = baseline_rollout_config();
    CHECK(base.budget == 3);
    CHECK(base.top_k == 3);
    CHECK_FALSE(base.condense);
    const RolloutConfig d;
    CHECK(d.budget == 5);
    CHECK(d.top_k == 5);
    CHECK(d.max_prompt_tokens == 4096);
    CHECK(d.max_response_tokens == 500);
    CHECK(d.condense);
    CHECK(d.aspect == AspectId::Clarity);
}

TEST_CASE("trajectory log round trip and line-numbered errors")
{
    TraceRig rig;
    ScriptedBackend policy(fixtures::trace_script());
    const auto t = run_rollout(fixtures::kTraceQuestion, policy, rig.ctx, RolloutConfig{});
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = (dir / "recon_traj.jsonl").string();
    write_trajectory_log({t, t}, path);
    const auto back = load_trajectory_log(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].segments == t.segments);
    CHECK(back[1].final_answer == t.final_answer);
    CHECK(back[1].stop == t.stop);
    CHECK(back[1].notes == t.notes);

    const auto bad = (dir / "recon_traj_bad.jsonl").string();
    std::ofstream(bad) << to_json(t).dump() << "\n" << R"({"question": 3})" << "\n";
    try {
        load_trajectory_log(bad);
        FAIL("expected error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("parallel batch matches sequential order")
{
    TraceRig rig;
    std::vector<std::string> questions;
    for (int i = 0; i < 24; ++i)
        questions.push_back("question " + std::to_string(i));
    PolicyFactory factory = [](const std::string& q) -> std::unique_ptr<GenerationBackend> {
        const bool odd = q.back() % 2 == 1;
        return std::make_unique<ScriptedBackend>(std::vector<std::string>{
            odd ? "<search> capital </search>" : "<search> Lyon </search>", "<answer> " + q + " </answer>"});
    };
    const auto seq = run_batch(questions, factory, rig.ctx, RolloutConfig{}, 1);
    const auto par = run_batch(questions, factory, rig.ctx, RolloutConfig{}, 6);
    REQUIRE(par.size() == seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        CHECK(par[i].question == questions[i]);
        CHECK(par[i].segments == seq[i].segments);
        CHECK(par[i].final_answer == std::optional<std::string>(questions[i]));
    }
}

TEST_CASE("remote policy backend wire contract")
{
    nlohmann::json seen;
    fixtures::MockServer server("/generate", fixtures::MockServer::json_reply([&](const nlohmann::json& req) {
        seen = req;
        return nlohmann::json{{"text", "<answer> Paris </answer>"}, {"finish_reason", "stop"}};
    }));
    TraceRig rig;
    HttpGenerationBackend policy(server.endpoint());
    RolloutConfig cfg;
    cfg.sampling = {0.9, 0.95, 50};
    const auto t = run_rollout(fixtures::kTraceQuestion, policy, rig.ctx, cfg);
    CHECK(t.final_answer == std::optional<std::string>("Paris"));
    CHECK(seen["max_tokens"] == 500);
    CHECK(seen["temperature"] == 0.9);
    CHECK(seen["top_p"] == 0.95);
    CHECK(seen["top_k"] == 50);
    CHECK(seen["stop"] == nlohmann::json::array({"</search>", "</answer>"}));

    HttpGenerationBackend dead(fixtures::dead_endpoint(), std::chrono::milliseconds(300));
    const auto failed = run_rollout("q?", dead, rig.ctx, RolloutConfig{});
    CHECK(failed.failed);
    CHECK(failed.segments.empty());
}

}

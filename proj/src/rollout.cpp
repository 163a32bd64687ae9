// SPDX-License-Identifier: Apache-2.0
#include "recon/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace recon {
namespace {

constexpr std::string_view kDefaultTemplate =
    "Answer the given question. Reason step by step. Whenever you lack knowledge, issue a search as "
    "<search> query </search> and the results will be returned between <information> and </information>. "
    "You may search as many times as needed. When you are ready, give the final answer as "
    "<answer> answer </answer> without further explanation.\n"
    "Question: {question}";

std::string substitute_question(std::string_view tmpl, std::string_view question)
{
    if (tmpl.find(kQuestionPlaceholder) == std::string_view::npos)
        throw std::invalid_argument("system template has no {question} placeholder");
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto hit = tmpl.find(kQuestionPlaceholder, pos);
        if (hit == std::string_view::npos)
            break;
        out.append(tmpl.substr(pos, hit - pos)).append(question);
        pos = hit + kQuestionPlaceholder.size();
    }
    out.append(tmpl.substr(pos));
    return out;
}

// A server that strips the matched stop string leaves "<search> q" with
// finish_reason "stop"; put the closing tag back so the action parses.
std::optional<std::string_view> missing_close_tag(std::string_view text)
{
    auto search_open = text.rfind(tags::search_open);
    auto answer_open = text.rfind(tags::answer_open);
    auto later = [](std::size_t a, std::size_t b) {
        if (a == std::string_view::npos)
            return false;
        return b == std::string_view::npos || a > b;
    };
    if (later(search_open, answer_open) && text.find(tags::search_close, search_open) == std::string_view::npos)
        return tags::search_close;
    if (later(answer_open, search_open) && text.find(tags::answer_close, answer_open) == std::string_view::npos)
        return tags::answer_close;
    return std::nullopt;
}

Segment make_segment(SegmentKind kind, std::string text, const Tokenizer& tokenizer)
{
    auto n = tokenizer.count(text);
    return Segment{kind, std::move(text), n};
}

}  // namespace

void RolloutConfig::validate() const
{
    if (budget < 1)
        throw std::invalid_argument("rollout budget must be >= 1");
    if (top_k < 1)
        throw std::invalid_argument("top_k must be >= 1");
    if (max_prompt_tokens < 1 || max_response_tokens < 1)
        throw std::invalid_argument("token limits must be positive");
    if (!(sampling.temperature > 0.0))
        throw std::invalid_argument("sampling temperature must be > 0");
    if (!(sampling.top_p > 0.0 && sampling.top_p <= 1.0))
        throw std::invalid_argument("top_p must lie in (0, 1]");
}

RolloutConfig baseline_rollout_config()
{
    RolloutConfig c;
    c.budget = 3;
    c.top_k = 3;
    c.condense = false;
    return c;
}

std::string_view to_string(SegmentKind kind)
{
    switch (kind) {
    case SegmentKind::PolicyText: return "policy";
    case SegmentKind::Information: return "information";
    case SegmentKind::Rethink: return "rethink";
    }
    return "policy";
}

SegmentKind segment_kind_from_string(std::string_view text)
{
    if (text == "policy")
        return SegmentKind::PolicyText;
    if (text == "information")
        return SegmentKind::Information;
    if (text == "rethink")
        return SegmentKind::Rethink;
    throw std::invalid_argument("unknown segment kind: " + std::string(text));
}

std::size_t Trajectory::total_tokens() const
{
    std::size_t n = 0;
    for (const auto& s : segments)
        n += s.token_count;
    return n;
}

std::size_t Trajectory::count(SegmentKind kind) const
{
    return static_cast<std::size_t>(
        std::count_if(segments.begin(), segments.end(), [kind](const Segment& s) { return s.kind == kind; }));
}

nlohmann::json to_json(const Trajectory& t)
{
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : t.segments)
        segs.push_back({{"kind", to_string(s.kind)}, {"text", s.text}, {"token_count", s.token_count}});
    nlohmann::json j = {
        {"question", t.question},
        {"segments", std::move(segs)},
        {"final_answer", t.final_answer ? nlohmann::json(*t.final_answer) : nlohmann::json(nullptr)},
        {"turns_used", t.turns_used},
        {"stop", to_string(t.stop)},
        {"wall_clock_ms", t.wall_clock_ms},
    };
    if (t.failed) {
        j["failed"] = true;
        j["error"] = t.error;
    }
    if (!t.notes.empty())
        j["notes"] = t.notes;
    return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j)
{
    Trajectory t;
    t.question = j.at("question").get<std::string>();
    for (const auto& s : j.at("segments")) {
        t.segments.push_back(Segment{segment_kind_from_string(s.at("kind").get<std::string>()),
                                     s.at("text").get<std::string>(), s.at("token_count").get<std::size_t>()});
    }
    if (auto it = j.find("final_answer"); it != j.end() && !it->is_null())
        t.final_answer = it->get<std::string>();
    t.turns_used = j.at("turns_used").get<int>();
    auto stop = stop_reason_from_string(j.at("stop").get<std::string>());
    if (!stop)
        throw std::invalid_argument("unknown stop reason: " + j.at("stop").get<std::string>());
    t.stop = *stop;
    t.wall_clock_ms = j.value("wall_clock_ms", 0.0);
    t.failed = j.value("failed", false);
    t.error = j.value("error", std::string{});
    t.notes = j.value("notes", std::vector<std::string>{});
    return t;
}

std::vector<Trajectory> load_trajectory_log(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open trajectory log " + path);
    std::vector<Trajectory> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ", line " + std::to_string(line_no) + ": malformed trajectory: " + e.what());
        }
    }
    return out;
}

void write_trajectory_log(const std::vector<Trajectory>& trajectories, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write trajectory log " + path);
    for (const auto& t : trajectories)
        out << to_json(t).dump() << '\n';
}

std::string_view default_system_template()
{
    return kDefaultTemplate;
}

std::string load_system_template(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open system template " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto text = buffer.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
        text.pop_back();
    if (text.find(kQuestionPlaceholder) == std::string::npos)
        throw std::invalid_argument("system template " + path + " has no {question} placeholder");
    return text;
}

PromptOverflow::PromptOverflow(std::optional<std::size_t> segment, std::size_t tokens, std::size_t limit)
    : std::runtime_error(
          (segment ? "prompt overflow at segment " + std::to_string(*segment) : std::string("prompt overflow in header")) +
          ": " + std::to_string(tokens) + " tokens exceeds limit " + std::to_string(limit)),
      segment_(segment)
{
}

std::string build_prompt(const Trajectory& trajectory, std::string_view system_template, std::size_t max_prompt_tokens,
                         const Tokenizer& tokenizer)
{
    auto out = substitute_question(system_template, trajectory.question);
    std::size_t tokens = tokenizer.count(out);
    if (tokens > max_prompt_tokens)
        throw PromptOverflow(std::nullopt, tokens, max_prompt_tokens);
    for (std::size_t i = 0; i < trajectory.segments.size(); ++i) {
        const auto& seg = trajectory.segments[i];
        tokens += seg.token_count;
        if (tokens > max_prompt_tokens)
            throw PromptOverflow(i, tokens, max_prompt_tokens);
        out.push_back('\n');
        out.append(seg.text);
    }
    return out;
}

Trajectory run_rollout(std::string_view question, GenerationBackend& policy, RolloutContext& context,
                       const RolloutConfig& config)
{
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const Tokenizer& tokenizer = *context.tokenizer;

    Trajectory t;
    t.question = std::string(question);
    t.stop = StopReason::BudgetExhausted;

    auto finish = [&]() -> Trajectory {
        t.wall_clock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        return std::move(t);
    };
    auto fail = [&](const std::string& what) -> Trajectory {
        t.failed = true;
        t.error = what;
        t.stop = StopReason::EndOfSequence;
        return finish();
    };

    if (trim(question).empty())
        return fail("empty question");

    for (int action = 0; action < config.budget; ++action) {
        GenerationRequest request;
        try {
            request.prompt =
                build_prompt(t, context.system_template, static_cast<std::size_t>(config.max_prompt_tokens), tokenizer);
        } catch (const std::exception& e) {
            return fail(e.what());
        }
        request.max_tokens = config.max_response_tokens;
        request.sampling = config.sampling;
        request.stop = {std::string(tags::search_close), std::string(tags::answer_close)};

        GenerationResponse response;
        try {
            response = policy.generate(request);
        } catch (const std::exception& e) {
            return fail(std::string("policy backend: ") + e.what());
        }

        StopScanner scanner;
        scanner.feed(response.text);
        std::string emitted = response.text;
        if (scanner.stopped()) {
            const auto hit = scanner.finish();
            if (hit.offset < emitted.size()) {
                if (!trim(std::string_view(emitted).substr(hit.offset)).empty())
                    t.notes.push_back("action " + std::to_string(action) + ": discarded " +
                                      std::to_string(emitted.size() - hit.offset) + " bytes after stop token");
                emitted.resize(hit.offset);
            }
        } else if (response.finish_reason == "stop") {
            if (auto close = missing_close_tag(emitted)) {
                emitted.append(*close);
                t.notes.push_back("action " + std::to_string(action) + ": restored stripped " + std::string(*close));
            }
        }

        auto parsed = parse_segment(emitted);
        t.segments.push_back(make_segment(SegmentKind::PolicyText, std::move(emitted), tokenizer));

        if (auto* search = std::get_if<SearchAction>(&parsed)) {
            std::vector<Document> docs;
            Summary summary;
            try {
                docs = context.retriever.search(search->query, static_cast<std::size_t>(config.top_k));
                if (config.condense) {
                    summary = context.condenser.condense(question, search->query, docs);
                } else {
                    summary.text = format_raw_documents(docs);
                }
            } catch (const std::exception& e) {
                return fail(std::string("retrieval/condense: ") + e.what());
            }
            t.segments.push_back(make_segment(SegmentKind::Information, wrap_information(summary.text), tokenizer));
            ++t.turns_used;
        } else if (auto* answer = std::get_if<AnswerAction>(&parsed)) {
            t.final_answer = answer->text;
            t.stop = StopReason::CloseAnswer;
            return finish();
        } else {
            t.segments.push_back(make_segment(SegmentKind::Rethink, std::string(kRethinkText), tokenizer));
        }
    }
    t.stop = StopReason::BudgetExhausted;
    return finish();
}

std::vector<Trajectory> run_batch(const std::vector<std::string>& questions, const PolicyFactory& make_policy,
                                  RolloutContext& context, const RolloutConfig& config, int parallel)
{
    std::vector<Trajectory> out(questions.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            auto i = next.fetch_add(1);
            if (i >= questions.size())
                return;
            try {
                auto policy = make_policy(questions[i]);
                out[i] = run_rollout(questions[i], *policy, context, config);
            } catch (const std::exception& e) {
                out[i].question = questions[i];
                out[i].failed = true;
                out[i].error = e.what();
                out[i].stop = StopReason::EndOfSequence;
            }
        }
    };

    const auto threads = static_cast<std::size_t>(std::max(1, parallel));
    if (threads == 1) {
        worker();
        return out;
    }
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < std::min(threads, questions.size()); ++i)
        pool.emplace_back(worker);
    pool.clear();
    return out;
}

}  // namespace recon

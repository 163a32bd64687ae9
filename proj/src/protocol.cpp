// SPDX-License-Identifier: Apache-2.0
#include "recon/protocol.hpp"

#include <array>
#include <utility>

#include "recon/text.hpp"

namespace recon {
namespace {

struct ClosedPair {
    std::size_t close_pos;
    std::string inner;
};

std::optional<ClosedPair> first_closed_pair(std::string_view text, std::string_view open,
                                            std::string_view close)
{
    auto open_pos = text.find(open);
    if (open_pos == std::string_view::npos)
        return std::nullopt;
    auto inner_begin = open_pos + open.size();
    auto close_pos = text.find(close, inner_begin);
    if (close_pos == std::string_view::npos)
        return std::nullopt;
    return ClosedPair{close_pos, trim(text.substr(inner_begin, close_pos - inner_begin))};
}

struct StopToken {
    std::string_view text;
    StopReason reason;
};

constexpr std::array<StopToken, 3> kStopTokens{{
    {tags::search_close, StopReason::CloseSearch},
    {tags::answer_close, StopReason::CloseAnswer},
    {tags::eos, StopReason::EndOfSequence},
}};

constexpr std::size_t max_stop_length()
{
    std::size_t n = 0;
    for (const auto& t : kStopTokens)
        n = t.text.size() > n ? t.text.size() : n;
    return n;
}

}  // namespace

Action parse_segment(std::string_view segment)
{
    auto search = first_closed_pair(segment, tags::search_open, tags::search_close);
    auto answer = first_closed_pair(segment, tags::answer_open, tags::answer_close);
    if (search && (!answer || search->close_pos < answer->close_pos))
        return SearchAction{std::move(search->inner)};
    if (answer)
        return AnswerAction{std::move(answer->inner)};
    return InvalidAction{};
}

std::string_view to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::CloseSearch: return "close_search";
    case StopReason::CloseAnswer: return "close_answer";
    case StopReason::EndOfSequence: return "end_of_sequence";
    case StopReason::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

std::optional<StopReason> stop_reason_from_string(std::string_view text)
{
    for (auto r : {StopReason::CloseSearch, StopReason::CloseAnswer, StopReason::EndOfSequence,
                   StopReason::BudgetExhausted}) {
        if (to_string(r) == text)
            return r;
    }
    return std::nullopt;
}

std::optional<StopHit> StopScanner::feed(std::string_view chunk)
{
    if (hit_)
        return hit_;
    std::string window = tail_;
    window.append(chunk);
    const std::size_t window_start = consumed_ - tail_.size();
    consumed_ += chunk.size();

    std::optional<StopHit> best;
    for (const auto& token : kStopTokens) {
        auto pos = window.find(token.text);
        if (pos == std::string::npos)
            continue;
        auto end = window_start + pos + token.text.size();
        if (!best || end < best->offset)
            best = StopHit{token.reason, end};
    }
    if (best) {
        hit_ = best;
        return hit_;
    }

    constexpr auto keep = max_stop_length() - 1;
    tail_ = window.size() > keep ? window.substr(window.size() - keep) : window;
    return std::nullopt;
}

StopHit StopScanner::finish() const
{
    if (hit_)
        return *hit_;
    return StopHit{StopReason::EndOfSequence, consumed_};
}

StopHit scan_stop(std::string_view text)
{
    StopScanner scanner;
    scanner.feed(text);
    return scanner.finish();
}

std::string wrap_information(std::string_view summary, std::string_view placeholder)
{
    std::string body = trim(summary).empty() ? std::string(placeholder) : std::string(summary);
    std::string out;
    out.reserve(body.size() + 32);
    out.append(tags::information_open).append(" ").append(body).append(" ").append(tags::information_close);
    return out;
}

}  // namespace recon

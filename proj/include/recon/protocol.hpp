// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace recon {

namespace tags {
inline constexpr std::string_view search_open = "<search>";
inline constexpr std::string_view search_close = "</search>";
inline constexpr std::string_view answer_open = "<answer>";
inline constexpr std::string_view answer_close = "</answer>";
inline constexpr std::string_view information_open = "<information>";
inline constexpr std::string_view information_close = "</information>";
inline constexpr std::string_view eos = "<eos>";
}  // namespace tags

/// Continuation appended after an emission that is neither a search nor an answer.
inline constexpr std::string_view kRethinkText = "My action is not correct. Let me rethink.";

/// Wrapped in place of an empty summary so a search is always followed by a
/// complete information block.
inline constexpr std::string_view kEmptySummaryPlaceholder = "No relevant information found.";

struct SearchAction {
    std::string query;
    bool operator==(const SearchAction&) const = default;
};

struct AnswerAction {
    std::string text;
    bool operator==(const AnswerAction&) const = default;
};

struct InvalidAction {
    bool operator==(const InvalidAction&) const = default;
};

using Action = std::variant<SearchAction, AnswerAction, InvalidAction>;

/// Resolves one generated segment to an action. The first closed
/// `<search>`/`<answer>` pair wins, ordered by the position of its closing
/// tag; inner text is trimmed. No closed pair gives InvalidAction.
Action parse_segment(std::string_view segment);

enum class StopReason { CloseSearch, CloseAnswer, EndOfSequence, BudgetExhausted };

std::string_view to_string(StopReason reason);
std::optional<StopReason> stop_reason_from_string(std::string_view text);

struct StopHit {
    StopReason reason;
    /// Byte offset (from the start of the stream) just past the stop token.
    std::size_t offset;
    bool operator==(const StopHit&) const = default;
};

/// Incremental stop-token detector. Tokens split across chunk boundaries
/// are found; the first completed token wins and later input is ignored.
class StopScanner {
public:
    std::optional<StopHit> feed(std::string_view chunk);

    /// End of stream: the stop hit if one fired, else EndOfSequence at the
    /// total number of bytes fed.
    StopHit finish() const;

    bool stopped() const { return hit_.has_value(); }
    std::size_t consumed() const { return consumed_; }

private:
    std::string tail_;
    std::size_t consumed_ = 0;
    std::optional<StopHit> hit_;
};

/// Full-buffer convenience wrapper over StopScanner.
StopHit scan_stop(std::string_view text);

std::string wrap_information(std::string_view summary,
                             std::string_view placeholder = kEmptySummaryPlaceholder);

}  // namespace recon

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "recon/condenser.hpp"
#include "recon/generation.hpp"
#include "recon/protocol.hpp"
#include "recon/retrieval.hpp"
#include "recon/text.hpp"

namespace recon {

struct RolloutConfig {
    int budget = 5;  // action iterations per rollout
    int top_k = 5;
    int max_prompt_tokens = 4096;
    int max_response_tokens = 500;
    bool condense = true;
    AspectId aspect = AspectId::Clarity;
    SamplingParams sampling;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;
};

/// Settings that reproduce the uncondensed three-turn, top-3 wiring.
RolloutConfig baseline_rollout_config();

/// Rethink segments are visible to the policy in later prompts but were not
/// generated by it.
enum class SegmentKind { PolicyText, Information, Rethink };

std::string_view to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(std::string_view text);

struct Segment {
    SegmentKind kind = SegmentKind::PolicyText;
    std::string text;
    std::size_t token_count = 0;

    bool operator==(const Segment&) const = default;
};

struct Trajectory {
    std::string question;
    std::vector<Segment> segments;
    std::optional<std::string> final_answer;
    int turns_used = 0;  // number of searches issued
    StopReason stop = StopReason::BudgetExhausted;
    bool failed = false;
    std::string error;
    std::vector<std::string> notes;
    double wall_clock_ms = 0.0;

    std::size_t total_tokens() const;
    std::size_t count(SegmentKind kind) const;
};

nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// Reads a trajectory log; a malformed line throws with its line number.
std::vector<Trajectory> load_trajectory_log(const std::string& path);
void write_trajectory_log(const std::vector<Trajectory>& trajectories, const std::string& path);

inline constexpr std::string_view kQuestionPlaceholder = "{question}";

/// The instruction template used when no template file is configured.
std::string_view default_system_template();
std::string load_system_template(const std::string& path);

class PromptOverflow : public std::runtime_error {
public:
    PromptOverflow(std::optional<std::size_t> segment, std::size_t tokens, std::size_t limit);
    /// Index of the first segment that does not fit; empty when the
    /// question header alone exceeds the limit.
    std::optional<std::size_t> segment() const { return segment_; }

private:
    std::optional<std::size_t> segment_;
};

/// Question header followed by every segment, newline separated. Throws
/// PromptOverflow rather than truncating.
std::string build_prompt(const Trajectory& trajectory, std::string_view system_template, std::size_t max_prompt_tokens,
                         const Tokenizer& tokenizer = default_tokenizer());

struct RolloutContext {
    Retriever& retriever;
    Condenser& condenser;
    std::string system_template = std::string(default_system_template());
    const Tokenizer* tokenizer = &default_tokenizer();
};

/// Multi-turn search/condense/answer loop. Backend failures do not throw:
/// the trajectory comes back with failed=true and its partial segments.
Trajectory run_rollout(std::string_view question, GenerationBackend& policy, RolloutContext& context,
                       const RolloutConfig& config);

using PolicyFactory = std::function<std::unique_ptr<GenerationBackend>(const std::string& question)>;

/// Runs one rollout per question on up to `parallel` threads; output order
/// follows input order.
std::vector<Trajectory> run_batch(const std::vector<std::string>& questions, const PolicyFactory& make_policy,
                                  RolloutContext& context, const RolloutConfig& config, int parallel = 1);

}  // namespace recon

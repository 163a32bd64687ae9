// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "recon/rl.hpp"
#include "recon/rollout.hpp"

namespace recon::toy {

/// Synthetic lookup task: every question asks for the value linked to a
/// subject symbol, and that value appears only in the subject's passage.
struct Fact {
    std::string subject;
    std::string answer;
};

struct ToyEnvConfig {
    std::size_t num_facts = 16;
    std::uint64_t seed = 1;
};

class ToyEnv {
public:
    explicit ToyEnv(ToyEnvConfig config = {});

    std::size_t size() const { return facts_.size(); }
    const Fact& fact(std::size_t i) const { return facts_.at(i); }
    std::string question(std::size_t i) const;
    std::vector<std::string> gold(std::size_t i) const { return {facts_.at(i).answer}; }
    std::optional<std::size_t> fact_for_question(std::string_view question) const;

    const CorpusIndex& index() const { return index_; }
    std::string_view system_template() const;

    /// Distinct lexical terms of every question, passage and answer.
    std::vector<std::string> vocabulary() const;

private:
    std::vector<Fact> facts_;
    CorpusIndex index_;
};

/// Emission templates the toy policy chooses between.
enum class Template : int { SearchSubject = 0, AnswerFromEvidence = 1, AnswerSubject = 2, Deliberate = 3 };
inline constexpr int kNumTemplates = 4;

/// Softmax table over templates, one row per (evidence seen, action step).
struct TabularPolicy {
    int budget = 5;
    std::vector<double> logits;

    explicit TabularPolicy(int budget = 5);
    int num_states() const { return 2 * budget; }
    int state(bool has_evidence, int step) const;
    std::span<const double> row(int state) const;
    double logprob(int state, int action) const;
};

struct Decision {
    int state;
    int action;
};

std::string render_template(Template t, std::string_view subject, std::string_view evidence_answer);

/// The value linked to `subject` in the last information block of `prompt`.
std::optional<std::string> evidence_answer(std::string_view prompt, std::string_view subject);

/// Samples templates from a TabularPolicy; one backend per rollout.
class ToyPolicyBackend final : public GenerationBackend {
public:
    ToyPolicyBackend(const TabularPolicy& policy, std::string subject, std::uint64_t seed, bool greedy = false);
    GenerationResponse generate(const GenerationRequest& request) override;
    const std::vector<Decision>& decisions() const { return decisions_; }

private:
    const TabularPolicy& policy_;
    std::string subject_;
    std::mt19937_64 rng_;
    bool greedy_;
    std::vector<Decision> decisions_;
};

struct ToyRollout {
    Trajectory trajectory;
    std::vector<Decision> decisions;
    std::size_t fact = 0;
};

/// Token-aligned PPO data for toy rollouts, plus the table entries each
/// position reads.
struct ToyBatch {
    std::vector<PPOSequence> sequences;
    std::vector<std::vector<int>> choice_state;  // -1: no template choice at this token
    std::vector<std::vector<int>> value_state;   // -1: terminal, value 0
};

/// Builds PPO sequences: the first token of each emission carries the
/// template choice, its remaining tokens are deterministic continuations.
ToyBatch assemble_batch(const ToyEnv& env, std::span<const ToyRollout> rollouts, const TabularPolicy& old_policy,
                        const TabularPolicy& reference, std::span<const double> critic, const PPOConfig& config);

std::vector<SequenceOutputs> policy_outputs(const ToyBatch& batch, const TabularPolicy& policy,
                                            std::span<const double> critic);

/// Accumulates logits/value gradients into table-shaped gradients.
void chain_gradients(const ToyBatch& batch, std::span<const SequenceOutputs> grad, std::vector<double>& policy_grad,
                     std::vector<double>& critic_grad);

struct ToyTrainConfig {
    int iterations = 200;
    int batch_size = 16;
    int minibatches = 2;
    std::size_t sentence_budget = 1;
    RolloutConfig rollout;
    PPOConfig ppo;
};

struct IterationLog {
    int iter = 0;
    double mean_em = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double kl_mean = 0.0;
    double mean_context_tokens = 0.0;
    double mean_turns = 0.0;
};

nlohmann::json to_json(const IterationLog& log);

struct ToyTrainResult {
    std::vector<IterationLog> curve;
    TabularPolicy policy;
    TabularPolicy reference;
    std::vector<double> critic;

    /// First iteration whose batch mean EM reached `threshold`.
    std::optional<int> first_iteration_reaching(double threshold) const;
    double mean_abs_logit_drift() const;
};

std::vector<ToyRollout> collect_rollouts(const ToyEnv& env, const TabularPolicy& policy, std::span<const std::size_t> facts,
                                         const ToyTrainConfig& config, std::uint64_t seed, bool greedy = false);

/// Alternates batched rollouts through run_rollout and PPO updates.
/// Throws std::runtime_error naming the iteration if a loss goes non-finite.
ToyTrainResult train_toy(const ToyEnv& env, const ToyTrainConfig& config,
                         const std::function<void(const IterationLog&)>& on_iteration = {});

struct ToyEvaluation {
    double mean_em = 0.0;
    double mean_context_tokens = 0.0;
    double mean_turns = 0.0;
};

/// Greedy rollouts of `policy` over every fact.
ToyEvaluation evaluate_policy(const ToyEnv& env, const TabularPolicy& policy, const ToyTrainConfig& config);

}  // namespace recon::toy

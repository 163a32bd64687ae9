// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recon/rollout.hpp"

namespace recon {

struct PPOConfig {
    double clip_epsilon = 0.2;
    double kl_beta = 0.001;
    double gamma = 1.0;
    double lambda = 1.0;
    double value_cliprange = 0.5;
    double entropy_coeff = 0.001;
    int ppo_epochs = 1;
    double actor_lr = 0.05;
    double critic_lr = 0.05;
    double grad_clip = 1.0;  // global L2 norm; <= 0 disables
    std::uint64_t seed = 1;

    void validate() const;
};

/// 1 on tokens of policy-generated segments, 0 on information blocks and
/// rethink continuations. Positions follow Segment::token_count.
/// Throws std::invalid_argument if no token is policy generated.
std::vector<std::uint8_t> compute_token_mask(const Trajectory& trajectory);

/// Per-token rewards: EM of the final answer on the last policy token, plus
/// -beta * (logprob_new - logprob_ref) on every policy token. Masked-out
/// tokens get 0.
std::vector<double> compute_rewards(const Trajectory& trajectory, std::span<const std::string> gold_answers,
                                    std::span<const double> logprob_new, std::span<const double> logprob_ref,
                                    double beta);

struct Advantages {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// GAE over the whole token sequence, terminal bootstrap 0. Masked-out
/// tokens take part in the recursion with their (zero) rewards.
Advantages gae_advantages(std::span<const double> rewards, std::span<const double> values, double gamma,
                          double lambda);

/// Variant that runs the recursion over policy tokens only, as if the
/// injected tokens were excised. Masked-out positions get advantage 0 and
/// return equal to their value.
Advantages gae_advantages_policy_only(std::span<const double> rewards, std::span<const double> values,
                                      std::span<const std::uint8_t> mask, double gamma, double lambda);

/// Token-aligned training data for one trajectory, collected under the
/// snapshot policy.
struct PPOSequence {
    std::vector<double> logprob_old;
    std::vector<double> logprob_ref;
    std::vector<double> value_old;
    std::vector<double> reward;
    std::vector<double> advantage;
    std::vector<double> return_target;
    std::vector<std::uint8_t> mask;
    std::vector<int> action;  // chosen index into the position's logits; -1 where nothing was chosen

    std::size_t size() const { return mask.size(); }
    void validate() const;
};

/// Current-policy outputs for one sequence, or gradients with the same shape.
struct SequenceOutputs {
    std::vector<std::vector<double>> logits;
    std::vector<double> values;
};

struct PPOStats {
    double surrogate = 0.0;  // clipped objective alone, before the entropy bonus
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double mean_ratio = 0.0;
    std::size_t policy_tokens = 0;
};

struct PPOLoss {
    double policy_loss = 0.0;  // -(surrogate + entropy_coeff * entropy)
    double value_loss = 0.0;
    PPOStats stats;
    std::vector<SequenceOutputs> grad;  // d policy_loss / d logits, d value_loss / d values
};

/// min(r A, clip(r, 1-eps, 1+eps) A)
double clipped_surrogate(double ratio, double advantage, double epsilon);

/// Each sequence contributes (1/|y|) * sum over policy tokens of the
/// clipped surrogate (plus entropy bonus); sequences are averaged. Value
/// loss is the clipped squared error, masked mean per sequence.
PPOLoss ppo_loss(std::span<const PPOSequence> batch, std::span<const SequenceOutputs> outputs, const PPOConfig& config);

double log_softmax_at(std::span<const double> logits, std::size_t index);

}  // namespace recon

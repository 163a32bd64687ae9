// SPDX-License-Identifier: Apache-2.0
#include "recon/rl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recon/evalkit.hpp"

namespace recon {
namespace {

std::vector<double> softmax(std::span<const double> logits)
{
    std::vector<double> p(logits.begin(), logits.end());
    const double zmax = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto& v : p)
        v /= sum;
    return p;
}

void check_length(std::size_t expected, std::size_t actual, const char* what)
{
    if (expected != actual)
        throw std::invalid_argument(std::string(what) + ": length " + std::to_string(actual) + ", expected " +
                                    std::to_string(expected));
}

}  // namespace

void PPOConfig::validate() const
{
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
        throw std::invalid_argument("clip_epsilon must lie in (0, 1)");
    if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("gamma and lambda must lie in [0, 1]");
    if (ppo_epochs < 1)
        throw std::invalid_argument("ppo_epochs must be >= 1");
}

std::vector<std::uint8_t> compute_token_mask(const Trajectory& trajectory)
{
    std::vector<std::uint8_t> mask;
    mask.reserve(trajectory.total_tokens());
    bool any = false;
    for (const auto& seg : trajectory.segments) {
        const std::uint8_t bit = seg.kind == SegmentKind::PolicyText ? 1 : 0;
        any = any || (bit && seg.token_count > 0);
        mask.insert(mask.end(), seg.token_count, bit);
    }
    if (!any)
        throw std::invalid_argument("trajectory has no policy-generated tokens");
    return mask;
}

std::vector<double> compute_rewards(const Trajectory& trajectory, std::span<const std::string> gold_answers,
                                    std::span<const double> logprob_new, std::span<const double> logprob_ref,
                                    double beta)
{
    auto mask = compute_token_mask(trajectory);
    check_length(mask.size(), logprob_new.size(), "logprob_new");
    check_length(mask.size(), logprob_ref.size(), "logprob_ref");

    std::vector<double> rewards(mask.size(), 0.0);
    std::size_t last_policy = 0;
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (!mask[t])
            continue;
        rewards[t] = -beta * (logprob_new[t] - logprob_ref[t]);
        last_policy = t;
    }
    rewards[last_policy] += static_cast<double>(em_score(trajectory.final_answer, gold_answers));
    return rewards;
}

Advantages gae_advantages(std::span<const double> rewards, std::span<const double> values, double gamma,
                          double lambda)
{
    check_length(rewards.size(), values.size(), "values");
    const auto n = rewards.size();
    Advantages out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    double next_adv = 0.0;
    double next_value = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double delta = rewards[i] + gamma * next_value - values[i];
        next_adv = delta + gamma * lambda * next_adv;
        out.advantages[i] = next_adv;
        out.returns[i] = next_adv + values[i];
        next_value = values[i];
    }
    return out;
}

Advantages gae_advantages_policy_only(std::span<const double> rewards, std::span<const double> values,
                                      std::span<const std::uint8_t> mask, double gamma, double lambda)
{
    check_length(rewards.size(), values.size(), "values");
    check_length(rewards.size(), mask.size(), "mask");
    std::vector<std::size_t> kept;
    std::vector<double> r;
    std::vector<double> v;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            kept.push_back(i);
            r.push_back(rewards[i]);
            v.push_back(values[i]);
        }
    }
    auto inner = gae_advantages(r, v, gamma, lambda);
    Advantages out{std::vector<double>(mask.size(), 0.0), std::vector<double>(values.begin(), values.end())};
    for (std::size_t k = 0; k < kept.size(); ++k) {
        out.advantages[kept[k]] = inner.advantages[k];
        out.returns[kept[k]] = inner.returns[k];
    }
    return out;
}

void PPOSequence::validate() const
{
    const auto n = mask.size();
    check_length(n, logprob_old.size(), "logprob_old");
    check_length(n, logprob_ref.size(), "logprob_ref");
    check_length(n, value_old.size(), "value_old");
    check_length(n, reward.size(), "reward");
    check_length(n, advantage.size(), "advantage");
    check_length(n, return_target.size(), "return_target");
    check_length(n, action.size(), "action");
    if (n == 0)
        throw std::invalid_argument("empty sequence");
    for (std::size_t t = 0; t < n; ++t) {
        if (mask[t] && action[t] < 0)
            throw std::invalid_argument("policy token " + std::to_string(t) + " has no chosen action");
    }
}

double clipped_surrogate(double ratio, double advantage, double epsilon)
{
    return std::min(ratio * advantage, std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

double log_softmax_at(std::span<const double> logits, std::size_t index)
{
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits)
        sum += std::exp(v - zmax);
    return logits[index] - zmax - std::log(sum);
}

PPOLoss ppo_loss(std::span<const PPOSequence> batch, std::span<const SequenceOutputs> outputs, const PPOConfig& config)
{
    config.validate();
    check_length(batch.size(), outputs.size(), "outputs");
    if (batch.empty())
        throw std::invalid_argument("empty PPO batch");

    const double eps = config.clip_epsilon;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    PPOLoss out;
    out.grad.resize(batch.size());
    std::size_t clipped = 0;
    double kl_sum = 0.0;
    double ratio_sum = 0.0;

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& seq = batch[s];
        const auto& cur = outputs[s];
        seq.validate();
        check_length(seq.size(), cur.logits.size(), "logits");
        check_length(seq.size(), cur.values.size(), "values");

        auto& g = out.grad[s];
        g.logits.resize(seq.size());
        g.values.assign(seq.size(), 0.0);
        for (std::size_t t = 0; t < seq.size(); ++t)
            g.logits[t].assign(cur.logits[t].size(), 0.0);

        const double inv_len = 1.0 / static_cast<double>(seq.size());
        std::size_t masked_in = 0;
        for (auto m : seq.mask)
            masked_in += m ? 1 : 0;

        double seq_surrogate = 0.0;
        double seq_entropy = 0.0;
        double seq_value = 0.0;
        for (std::size_t t = 0; t < seq.size(); ++t) {
            if (!seq.mask[t])
                continue;
            const auto& z = cur.logits[t];
            const auto a = static_cast<std::size_t>(seq.action[t]);
            if (z.empty() || a >= z.size())
                throw std::invalid_argument("sequence " + std::to_string(s) + " token " + std::to_string(t) +
                                            ": action outside logits");

            const auto p = softmax(z);
            const double logprob = log_softmax_at(z, a);
            const double ratio = std::exp(logprob - seq.logprob_old[t]);
            if (!std::isfinite(ratio))
                throw std::domain_error("non-finite ratio at sequence " + std::to_string(s) + " token " +
                                        std::to_string(t));

            const double adv = seq.advantage[t];
            const double unclipped = ratio * adv;
            const double clipped_term = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
            const bool use_unclipped = unclipped <= clipped_term;
            seq_surrogate += std::min(unclipped, clipped_term);
            if (!use_unclipped)
                ++clipped;
            const double dsurr_dlogprob = use_unclipped ? unclipped : 0.0;

            double entropy = 0.0;
            for (double pj : p) {
                if (pj > 0.0)
                    entropy -= pj * std::log(pj);
            }
            seq_entropy += entropy;

            const double scale = -inv_batch * inv_len;
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double dlogprob = (j == a ? 1.0 : 0.0) - p[j];
                const double dentropy = p[j] > 0.0 ? -p[j] * (std::log(p[j]) + entropy) : 0.0;
                g.logits[t][j] = scale * (dsurr_dlogprob * dlogprob + config.entropy_coeff * dentropy);
            }

            // Clipped value loss.
            const double v = cur.values[t];
            const double v_old = seq.value_old[t];
            const double target = seq.return_target[t];
            const double delta = v - v_old;
            const bool inside = std::abs(delta) < config.value_cliprange;
            const double v_clip = v_old + std::clamp(delta, -config.value_cliprange, config.value_cliprange);
            const double err = v - target;
            const double err_clip = v_clip - target;
            const double vscale = inv_batch / static_cast<double>(masked_in);
            if (err * err >= err_clip * err_clip) {
                seq_value += 0.5 * err * err;
                g.values[t] = vscale * err;
            } else {
                seq_value += 0.5 * err_clip * err_clip;
                g.values[t] = inside ? vscale * err_clip : 0.0;
            }

            kl_sum += seq.logprob_old[t] - logprob;
            ratio_sum += ratio;
            ++out.stats.policy_tokens;
        }
        out.stats.surrogate += inv_batch * inv_len * seq_surrogate;
        out.stats.entropy += inv_batch * inv_len * seq_entropy;
        if (masked_in > 0)
            out.value_loss += inv_batch * seq_value / static_cast<double>(masked_in);
    }

    if (out.stats.policy_tokens == 0)
        throw std::invalid_argument("PPO batch has no policy tokens");
    const double n = static_cast<double>(out.stats.policy_tokens);
    out.stats.clip_fraction = static_cast<double>(clipped) / n;
    out.stats.approx_kl = kl_sum / n;
    out.stats.mean_ratio = ratio_sum / n;
    out.policy_loss = -(out.stats.surrogate + config.entropy_coeff * out.stats.entropy);
    return out;
}

}  // namespace recon

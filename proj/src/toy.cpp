// SPDX-License-Identifier: Apache-2.0
#include "recon/toy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "recon/evalkit.hpp"

namespace recon::toy {
namespace {

constexpr std::array<std::string_view, 4> kFiller{
    "the record is kept in the archive.",
    "this entry was checked by the curator.",
    "no other value is linked here.",
    "the archive holds many such records.",
};

constexpr std::string_view kToyTemplate =
    "Look up the value linked to the subject, then answer.\nQuestion: {question}";

std::string two_digit(char prefix, std::size_t i)
{
    std::string s(1, prefix);
    if (i < 10)
        s.push_back('0');
    s += std::to_string(i);
    return s;
}

struct Adam {
    double lr;
    std::vector<double> m;
    std::vector<double> v;
    int t = 0;

    Adam(double learning_rate, std::size_t n) : lr(learning_rate), m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grad)
    {
        constexpr double b1 = 0.9;
        constexpr double b2 = 0.999;
        constexpr double eps = 1e-8;
        ++t;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

void clip_global_norm(std::vector<double>& grad, double max_norm)
{
    if (max_norm <= 0.0)
        return;
    double sq = 0.0;
    for (double g : grad)
        sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        for (auto& g : grad)
            g *= max_norm / norm;
    }
}

ToyBatch subset(const ToyBatch& batch, std::span<const std::size_t> indices)
{
    ToyBatch out;
    for (auto i : indices) {
        out.sequences.push_back(batch.sequences[i]);
        out.choice_state.push_back(batch.choice_state[i]);
        out.value_state.push_back(batch.value_state[i]);
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

ToyEnv::ToyEnv(ToyEnvConfig config)
{
    if (config.num_facts == 0 || config.num_facts > 100)
        throw std::invalid_argument("toy environment supports 1..100 facts");

    std::vector<std::size_t> perm(config.num_facts);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(config.seed);
    std::shuffle(perm.begin(), perm.end(), rng);

    std::vector<Document> docs;
    for (std::size_t i = 0; i < config.num_facts; ++i) {
        Fact f{two_digit('e', i), two_digit('a', perm[i])};
        std::string text = f.subject + " maps to " + f.answer + ".";
        for (std::size_t k = 0; k < 3; ++k)
            text += " " + std::string(kFiller[(i + k) % kFiller.size()]);
        docs.push_back(Document{two_digit('f', i), f.subject, std::move(text)});
        facts_.push_back(std::move(f));
    }
    index_ = CorpusIndex::build(std::move(docs));
}

std::string ToyEnv::question(std::size_t i) const
{
    return "what does " + facts_.at(i).subject + " map to ?";
}

std::optional<std::size_t> ToyEnv::fact_for_question(std::string_view q) const
{
    for (std::size_t i = 0; i < facts_.size(); ++i) {
        if (question(i) == q)
            return i;
    }
    return std::nullopt;
}

std::string_view ToyEnv::system_template() const
{
    return kToyTemplate;
}

std::vector<std::string> ToyEnv::vocabulary() const
{
    std::set<std::string> vocab;
    for (std::size_t i = 0; i < facts_.size(); ++i) {
        for (auto& t : lexical_terms(question(i)))
            vocab.insert(std::move(t));
        for (auto& t : lexical_terms(facts_[i].answer))
            vocab.insert(std::move(t));
    }
    for (const auto& d : index_.documents()) {
        for (auto& t : lexical_terms(d.title + " " + d.text))
            vocab.insert(std::move(t));
    }
    return {vocab.begin(), vocab.end()};
}

TabularPolicy::TabularPolicy(int b) : budget(b), logits(static_cast<std::size_t>(2 * b * kNumTemplates), 0.0)
{
    if (b < 1)
        throw std::invalid_argument("toy policy budget must be >= 1");
}

int TabularPolicy::state(bool has_evidence, int step) const
{
    return (has_evidence ? budget : 0) + std::clamp(step, 0, budget - 1);
}

std::span<const double> TabularPolicy::row(int s) const
{
    return std::span<const double>(logits).subspan(static_cast<std::size_t>(s * kNumTemplates), kNumTemplates);
}

double TabularPolicy::logprob(int s, int action) const
{
    return log_softmax_at(row(s), static_cast<std::size_t>(action));
}

std::string render_template(Template t, std::string_view subject, std::string_view evidence)
{
    switch (t) {
    case Template::SearchSubject: return "<search> " + std::string(subject) + " maps to </search>";
    case Template::AnswerFromEvidence: return "<answer> " + std::string(evidence) + " </answer>";
    case Template::AnswerSubject: return "<answer> " + std::string(subject) + " </answer>";
    case Template::Deliberate: return "i should think about this first";
    }
    return {};
}

std::optional<std::string> evidence_answer(std::string_view prompt, std::string_view subject)
{
    auto open = prompt.rfind(tags::information_open);
    if (open == std::string_view::npos)
        return std::nullopt;
    auto block = prompt.substr(open);
    if (auto close = block.find(tags::information_close); close != std::string_view::npos)
        block = block.substr(0, close);

    const std::string needle = std::string(subject) + " maps to ";
    auto at = block.find(needle);
    if (at == std::string_view::npos)
        return std::nullopt;
    auto rest = block.substr(at + needle.size());
    auto end = rest.find_first_of(" \t\n");
    std::string value(rest.substr(0, end));
    while (!value.empty() && (value.back() == '.' || value.back() == ',' || value.back() == ';'))
        value.pop_back();
    if (value.empty())
        return std::nullopt;
    return value;
}

ToyPolicyBackend::ToyPolicyBackend(const TabularPolicy& policy, std::string subject, std::uint64_t seed, bool greedy)
    : policy_(policy), subject_(std::move(subject)), rng_(seed), greedy_(greedy)
{
}

// Samples at temperature 1 from the table regardless of the request's
// sampling block, so recorded choices match the table's log-probabilities.
GenerationResponse ToyPolicyBackend::generate(const GenerationRequest& request)
{
    const bool has_evidence = request.prompt.find(tags::information_open) != std::string::npos;
    const int s = policy_.state(has_evidence, static_cast<int>(decisions_.size()));
    const auto row = policy_.row(s);

    int action = 0;
    if (greedy_) {
        action = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    } else {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double u = unit(rng_);
        for (action = 0; action < kNumTemplates - 1; ++action) {
            u -= std::exp(policy_.logprob(s, action));
            if (u < 0.0)
                break;
        }
    }
    decisions_.push_back(Decision{s, action});

    const auto evidence = evidence_answer(request.prompt, subject_).value_or("unknown");
    return GenerationResponse{render_template(static_cast<Template>(action), subject_, evidence), "stop"};
}

ToyBatch assemble_batch(const ToyEnv& env, std::span<const ToyRollout> rollouts, const TabularPolicy& old_policy,
                        const TabularPolicy& reference, std::span<const double> critic, const PPOConfig& config)
{
    ToyBatch batch;
    for (const auto& r : rollouts) {
        const auto& traj = r.trajectory;
        if (traj.count(SegmentKind::PolicyText) != r.decisions.size())
            throw std::logic_error("toy rollout: emissions and recorded decisions disagree");

        PPOSequence seq;
        std::vector<int> choice;
        std::vector<int> vstate;
        std::size_t k = 0;
        for (const auto& seg : traj.segments) {
            if (seg.kind == SegmentKind::PolicyText) {
                const auto& d = r.decisions[k++];
                for (std::size_t i = 0; i < seg.token_count; ++i) {
                    const bool first = i == 0;
                    seq.mask.push_back(1);
                    seq.action.push_back(first ? d.action : 0);
                    seq.logprob_old.push_back(first ? old_policy.logprob(d.state, d.action) : 0.0);
                    seq.logprob_ref.push_back(first ? reference.logprob(d.state, d.action) : 0.0);
                    choice.push_back(first ? d.state : -1);
                    vstate.push_back(d.state);
                }
            } else {
                const int next = k < r.decisions.size() ? r.decisions[k].state : -1;
                for (std::size_t i = 0; i < seg.token_count; ++i) {
                    seq.mask.push_back(0);
                    seq.action.push_back(-1);
                    seq.logprob_old.push_back(0.0);
                    seq.logprob_ref.push_back(0.0);
                    choice.push_back(-1);
                    vstate.push_back(next);
                }
            }
        }
        for (int v : vstate)
            seq.value_old.push_back(v >= 0 ? critic[static_cast<std::size_t>(v)] : 0.0);

        const auto gold = env.gold(r.fact);
        seq.reward = compute_rewards(traj, gold, seq.logprob_old, seq.logprob_ref, config.kl_beta);
        auto adv = gae_advantages(seq.reward, seq.value_old, config.gamma, config.lambda);
        seq.advantage = std::move(adv.advantages);
        seq.return_target = std::move(adv.returns);

        batch.sequences.push_back(std::move(seq));
        batch.choice_state.push_back(std::move(choice));
        batch.value_state.push_back(std::move(vstate));
    }
    return batch;
}

std::vector<SequenceOutputs> policy_outputs(const ToyBatch& batch, const TabularPolicy& policy,
                                            std::span<const double> critic)
{
    std::vector<SequenceOutputs> out(batch.sequences.size());
    for (std::size_t s = 0; s < batch.sequences.size(); ++s) {
        const auto n = batch.sequences[s].size();
        out[s].logits.reserve(n);
        out[s].values.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            const int cs = batch.choice_state[s][t];
            if (cs >= 0) {
                auto row = policy.row(cs);
                out[s].logits.emplace_back(row.begin(), row.end());
            } else {
                out[s].logits.push_back({0.0});
            }
            const int vs = batch.value_state[s][t];
            out[s].values.push_back(vs >= 0 ? critic[static_cast<std::size_t>(vs)] : 0.0);
        }
    }
    return out;
}

void chain_gradients(const ToyBatch& batch, std::span<const SequenceOutputs> grad, std::vector<double>& policy_grad,
                     std::vector<double>& critic_grad)
{
    for (std::size_t s = 0; s < batch.sequences.size(); ++s) {
        for (std::size_t t = 0; t < batch.sequences[s].size(); ++t) {
            const int cs = batch.choice_state[s][t];
            if (cs >= 0) {
                for (int j = 0; j < kNumTemplates; ++j)
                    policy_grad[static_cast<std::size_t>(cs * kNumTemplates + j)] +=
                        grad[s].logits[t][static_cast<std::size_t>(j)];
            }
            const int vs = batch.value_state[s][t];
            if (vs >= 0)
                critic_grad[static_cast<std::size_t>(vs)] += grad[s].values[t];
        }
    }
}

nlohmann::json to_json(const IterationLog& log)
{
    return {
        {"iter", log.iter},
        {"mean_em", log.mean_em},
        {"policy_loss", log.policy_loss},
        {"value_loss", log.value_loss},
        {"kl_mean", log.kl_mean},
        {"mean_context_tokens", log.mean_context_tokens},
        {"mean_turns", log.mean_turns},
    };
}

std::optional<int> ToyTrainResult::first_iteration_reaching(double threshold) const
{
    for (const auto& log : curve) {
        if (log.mean_em >= threshold)
            return log.iter;
    }
    return std::nullopt;
}

double ToyTrainResult::mean_abs_logit_drift() const
{
    double sum = 0.0;
    for (std::size_t i = 0; i < policy.logits.size(); ++i)
        sum += std::abs(policy.logits[i] - reference.logits[i]);
    return sum / static_cast<double>(policy.logits.size());
}

std::vector<ToyRollout> collect_rollouts(const ToyEnv& env, const TabularPolicy& policy, std::span<const std::size_t> facts,
                                         const ToyTrainConfig& config, std::uint64_t seed, bool greedy)
{
    LocalRetriever retriever(env.index());
    ExtractiveCondenser extractive(config.sentence_budget, config.rollout.aspect);
    RawCondenser raw;
    Condenser& condenser = config.rollout.condense ? static_cast<Condenser&>(extractive) : raw;
    RolloutContext context{retriever, condenser, std::string(env.system_template())};

    std::vector<ToyRollout> out;
    out.reserve(facts.size());
    for (std::size_t k = 0; k < facts.size(); ++k) {
        const auto fact = facts[k];
        ToyPolicyBackend backend(policy, env.fact(fact).subject, mix_seed(seed, k), greedy);
        auto traj = run_rollout(env.question(fact), backend, context, config.rollout);
        if (traj.failed)
            throw std::runtime_error("toy rollout failed: " + traj.error);
        out.push_back(ToyRollout{std::move(traj), backend.decisions(), fact});
    }
    return out;
}

ToyTrainResult train_toy(const ToyEnv& env, const ToyTrainConfig& config,
                         const std::function<void(const IterationLog&)>& on_iteration)
{
    config.rollout.validate();
    config.ppo.validate();
    if (config.batch_size < 1 || config.minibatches < 1 || config.minibatches > config.batch_size)
        throw std::invalid_argument("toy training needs 1 <= minibatches <= batch_size");

    ToyTrainResult result{{}, TabularPolicy(config.rollout.budget), TabularPolicy(config.rollout.budget), {}};
    auto& policy = result.policy;
    result.critic.assign(static_cast<std::size_t>(policy.num_states()), 0.0);
    Adam actor(config.ppo.actor_lr, policy.logits.size());
    Adam critic_opt(config.ppo.critic_lr, result.critic.size());
    std::mt19937_64 rng(config.ppo.seed);

    std::vector<std::size_t> all(env.size());
    std::iota(all.begin(), all.end(), 0);

    for (int iter = 1; iter <= config.iterations; ++iter) {
        std::vector<std::size_t> facts;
        while (facts.size() < static_cast<std::size_t>(config.batch_size)) {
            std::shuffle(all.begin(), all.end(), rng);
            for (auto f : all) {
                if (facts.size() < static_cast<std::size_t>(config.batch_size))
                    facts.push_back(f);
            }
        }

        const TabularPolicy snapshot = policy;
        auto rollouts = collect_rollouts(env, snapshot, facts, config, mix_seed(config.ppo.seed, static_cast<std::uint64_t>(iter)));
        auto batch = assemble_batch(env, rollouts, snapshot, result.reference, result.critic, config.ppo);

        IterationLog log;
        log.iter = iter;
        std::size_t choice_tokens = 0;
        for (std::size_t s = 0; s < batch.sequences.size(); ++s) {
            for (std::size_t t = 0; t < batch.sequences[s].size(); ++t) {
                if (batch.choice_state[s][t] >= 0) {
                    log.kl_mean += batch.sequences[s].logprob_old[t] - batch.sequences[s].logprob_ref[t];
                    ++choice_tokens;
                }
            }
        }
        log.kl_mean /= static_cast<double>(std::max<std::size_t>(choice_tokens, 1));
        for (const auto& r : rollouts) {
            log.mean_em += em_score(r.trajectory.final_answer, env.gold(r.fact));
            log.mean_context_tokens += static_cast<double>(r.trajectory.total_tokens());
            log.mean_turns += r.trajectory.turns_used;
        }
        const double n = static_cast<double>(rollouts.size());
        log.mean_em /= n;
        log.mean_context_tokens /= n;
        log.mean_turns /= n;

        std::vector<std::size_t> order(batch.sequences.size());
        std::iota(order.begin(), order.end(), 0);
        int updates = 0;
        for (int epoch = 0; epoch < config.ppo.ppo_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            const auto per = order.size() / static_cast<std::size_t>(config.minibatches);
            for (int mb = 0; mb < config.minibatches; ++mb) {
                const auto begin = static_cast<std::size_t>(mb) * per;
                const auto end = mb + 1 == config.minibatches ? order.size() : begin + per;
                auto sub = subset(batch, std::span<const std::size_t>(order).subspan(begin, end - begin));
                auto outputs = policy_outputs(sub, policy, result.critic);
                PPOLoss loss;
                try {
                    loss = ppo_loss(sub.sequences, outputs, config.ppo);
                } catch (const std::domain_error& e) {
                    throw std::runtime_error("toy training diverged at iteration " + std::to_string(iter) + ": " +
                                             e.what());
                }
                if (!std::isfinite(loss.policy_loss) || !std::isfinite(loss.value_loss))
                    throw std::runtime_error("toy training diverged at iteration " + std::to_string(iter));

                std::vector<double> pg(policy.logits.size(), 0.0);
                std::vector<double> vg(result.critic.size(), 0.0);
                chain_gradients(sub, loss.grad, pg, vg);
                clip_global_norm(pg, config.ppo.grad_clip);
                clip_global_norm(vg, config.ppo.grad_clip);
                actor.step(policy.logits, pg);
                critic_opt.step(result.critic, vg);

                log.policy_loss += loss.policy_loss;
                log.value_loss += loss.value_loss;
                ++updates;
            }
        }
        log.policy_loss /= updates;
        log.value_loss /= updates;

        result.curve.push_back(log);
        if (on_iteration)
            on_iteration(log);
    }
    return result;
}

ToyEvaluation evaluate_policy(const ToyEnv& env, const TabularPolicy& policy, const ToyTrainConfig& config)
{
    std::vector<std::size_t> facts(env.size());
    std::iota(facts.begin(), facts.end(), 0);
    auto rollouts = collect_rollouts(env, policy, facts, config, config.ppo.seed, true);
    ToyEvaluation ev;
    for (const auto& r : rollouts) {
        ev.mean_em += em_score(r.trajectory.final_answer, env.gold(r.fact));
        ev.mean_context_tokens += static_cast<double>(r.trajectory.total_tokens());
        ev.mean_turns += r.trajectory.turns_used;
    }
    const double n = static_cast<double>(rollouts.size());
    ev.mean_em /= n;
    ev.mean_context_tokens /= n;
    ev.mean_turns /= n;
    return ev;
}

}  // namespace recon::toy

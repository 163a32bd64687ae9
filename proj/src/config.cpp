// SPDX-License-Identifier: Apache-2.0
#include "recon/config.hpp"

#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "recon/text.hpp"

namespace recon {
namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value)
{
    std::istringstream in{std::string(value)};
    T out{};
    in >> out;
    if (in.fail() || !in.eof())
        throw std::invalid_argument("config key '" + std::string(key) + "': not a number: '" + std::string(value) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value)
{
    const auto v = to_lower_ascii(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw std::invalid_argument("config key '" + std::string(key) + "': not a boolean: '" + std::string(value) + "'");
}

std::optional<Endpoint> parse_endpoint(std::string_view value)
{
    if (trim(value).empty())
        return std::nullopt;
    return Endpoint::parse(trim(value));
}

std::string fmt(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

void RunConfig::validate() const
{
    int sources = 0;
    sources += corpus.empty() ? 0 : 1;
    sources += index.empty() ? 0 : 1;
    sources += retriever_endpoint ? 1 : 0;
    if (sources > 1)
        throw std::invalid_argument("at most one retrieval source may be set (corpus, index, retriever_endpoint)");
    if (sentence_budget == 0)
        throw std::invalid_argument("sentence_budget must be positive");
    if (parallel < 1)
        throw std::invalid_argument("parallel must be >= 1");
    rollout.validate();
    ppo.validate();
}

void apply_config_value(RunConfig& c, std::string_view key, std::string_view value)
{
    const std::string v = trim(value);
    auto& r = c.rollout;
    auto& p = c.ppo;
    if (key == "corpus") c.corpus = v;
    else if (key == "index") c.index = v;
    else if (key == "qa") c.qa = v;
    else if (key == "logs_dir") c.logs_dir = v;
    else if (key == "reports_dir") c.reports_dir = v;
    else if (key == "system_template") c.system_template = v;
    else if (key == "policy_script") c.policy_script = v;
    else if (key == "policy_endpoint") c.policy_endpoint = parse_endpoint(v);
    else if (key == "summarizer_endpoint") c.summarizer_endpoint = parse_endpoint(v);
    else if (key == "retriever_endpoint") c.retriever_endpoint = parse_endpoint(v);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "sentence_budget") c.sentence_budget = parse_number<std::size_t>(key, v);
    else if (key == "parallel") c.parallel = parse_number<int>(key, v);
    else if (key == "rollout.budget") r.budget = parse_number<int>(key, v);
    else if (key == "rollout.top_k") r.top_k = parse_number<int>(key, v);
    else if (key == "rollout.max_prompt_tokens") r.max_prompt_tokens = parse_number<int>(key, v);
    else if (key == "rollout.max_response_tokens") r.max_response_tokens = parse_number<int>(key, v);
    else if (key == "rollout.condense") r.condense = parse_bool(key, v);
    else if (key == "rollout.aspect") r.aspect = parse_aspect(v);
    else if (key == "rollout.temperature") r.sampling.temperature = parse_number<double>(key, v);
    else if (key == "rollout.top_p") r.sampling.top_p = parse_number<double>(key, v);
    else if (key == "rollout.sampling_top_k") r.sampling.top_k = parse_number<int>(key, v);
    else if (key == "ppo.clip_epsilon") p.clip_epsilon = parse_number<double>(key, v);
    else if (key == "ppo.kl_beta") p.kl_beta = parse_number<double>(key, v);
    else if (key == "ppo.gamma") p.gamma = parse_number<double>(key, v);
    else if (key == "ppo.lambda") p.lambda = parse_number<double>(key, v);
    else if (key == "ppo.value_cliprange") p.value_cliprange = parse_number<double>(key, v);
    else if (key == "ppo.entropy_coeff") p.entropy_coeff = parse_number<double>(key, v);
    else if (key == "ppo.ppo_epochs") p.ppo_epochs = parse_number<int>(key, v);
    else if (key == "ppo.actor_lr") p.actor_lr = parse_number<double>(key, v);
    else if (key == "ppo.critic_lr") p.critic_lr = parse_number<double>(key, v);
    else if (key == "ppo.grad_clip") p.grad_clip = parse_number<double>(key, v);
    else throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
}

std::map<std::string, std::string> parse_config_file(const std::string& path)
{
    CLI::ConfigINI parser;
    std::vector<CLI::ConfigItem> items;
    try {
        items = parser.from_file(path);
    } catch (const CLI::Error& e) {
        throw std::runtime_error("cannot read config file " + path + ": " + e.what());
    }
    std::map<std::string, std::string> out;
    for (const auto& item : items) {
        if (item.name == "--" || item.name == "++")
            continue;
        std::vector<std::string> parts;
        for (const auto& p : item.parents) {
            if (p != "default")
                parts.push_back(p);
        }
        parts.push_back(item.name);
        std::string key;
        for (const auto& part : parts)
            key += (key.empty() ? "" : ".") + part;
        std::string value;
        for (const auto& in : item.inputs)
            value += (value.empty() ? "" : ",") + in;
        out[key] = value;
    }
    return out;
}

void apply_config_file(RunConfig& config, const std::string& path)
{
    for (const auto& [key, value] : parse_config_file(path)) {
        try {
            apply_config_value(config, key, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument(path + ": " + e.what());
        }
    }
}

void apply_environment(RunConfig& config)
{
    if (const char* seed = std::getenv("RECON_SEED"); seed != nullptr && *seed != '\0')
        config.seed = parse_number<std::uint64_t>("RECON_SEED", seed);
}

std::map<std::string, std::string> config_keys(const RunConfig& c)
{
    const auto& r = c.rollout;
    const auto& p = c.ppo;
    auto ep = [](const std::optional<Endpoint>& e) { return e ? e->url() : std::string(); };
    return {
        {"corpus", c.corpus},
        {"index", c.index},
        {"qa", c.qa},
        {"logs_dir", c.logs_dir},
        {"reports_dir", c.reports_dir},
        {"system_template", c.system_template},
        {"policy_script", c.policy_script},
        {"policy_endpoint", ep(c.policy_endpoint)},
        {"summarizer_endpoint", ep(c.summarizer_endpoint)},
        {"retriever_endpoint", ep(c.retriever_endpoint)},
        {"seed", std::to_string(c.seed)},
        {"sentence_budget", std::to_string(c.sentence_budget)},
        {"parallel", std::to_string(c.parallel)},
        {"rollout.budget", std::to_string(r.budget)},
        {"rollout.top_k", std::to_string(r.top_k)},
        {"rollout.max_prompt_tokens", std::to_string(r.max_prompt_tokens)},
        {"rollout.max_response_tokens", std::to_string(r.max_response_tokens)},
        {"rollout.condense", r.condense ? "true" : "false"},
        {"rollout.aspect", std::string(to_string(r.aspect))},
        {"rollout.temperature", fmt(r.sampling.temperature)},
        {"rollout.top_p", fmt(r.sampling.top_p)},
        {"rollout.sampling_top_k", std::to_string(r.sampling.top_k)},
        {"ppo.clip_epsilon", fmt(p.clip_epsilon)},
        {"ppo.kl_beta", fmt(p.kl_beta)},
        {"ppo.gamma", fmt(p.gamma)},
        {"ppo.lambda", fmt(p.lambda)},
        {"ppo.value_cliprange", fmt(p.value_cliprange)},
        {"ppo.entropy_coeff", fmt(p.entropy_coeff)},
        {"ppo.ppo_epochs", std::to_string(p.ppo_epochs)},
        {"ppo.actor_lr", fmt(p.actor_lr)},
        {"ppo.critic_lr", fmt(p.critic_lr)},
        {"ppo.grad_clip", fmt(p.grad_clip)},
    };
}

nlohmann::json to_json(const RunConfig& c)
{
    const auto& r = c.rollout;
    const auto& p = c.ppo;
    auto ep = [](const std::optional<Endpoint>& e) -> nlohmann::json {
        return e ? nlohmann::json(e->url()) : nlohmann::json(nullptr);
    };
    return {
        {"paths",
         {{"corpus", c.corpus},
          {"index", c.index},
          {"qa", c.qa},
          {"logs_dir", c.logs_dir},
          {"reports_dir", c.reports_dir},
          {"system_template", c.system_template},
          {"policy_script", c.policy_script}}},
        {"rollout",
         {{"budget", r.budget},
          {"top_k", r.top_k},
          {"max_prompt_tokens", r.max_prompt_tokens},
          {"max_response_tokens", r.max_response_tokens},
          {"condense", r.condense},
          {"aspect", std::string(to_string(r.aspect))},
          {"sampling", {{"temperature", r.sampling.temperature}, {"top_p", r.sampling.top_p}, {"top_k", r.sampling.top_k}}},
          {"sentence_budget", c.sentence_budget}}},
        {"ppo",
         {{"clip_epsilon", p.clip_epsilon},
          {"kl_beta", p.kl_beta},
          {"gamma", p.gamma},
          {"lambda", p.lambda},
          {"value_cliprange", p.value_cliprange},
          {"entropy_coeff", p.entropy_coeff},
          {"ppo_epochs", p.ppo_epochs},
          {"actor_lr", p.actor_lr},
          {"critic_lr", p.critic_lr},
          {"grad_clip", p.grad_clip}}},
        {"endpoints",
         {{"policy", ep(c.policy_endpoint)}, {"summarizer", ep(c.summarizer_endpoint)}, {"retriever", ep(c.retriever_endpoint)}}},
        {"parallel", c.parallel},
        {"seed", c.seed},
    };
}

}  // namespace recon

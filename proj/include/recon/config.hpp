// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "recon/http.hpp"
#include "recon/rl.hpp"
#include "recon/rollout.hpp"

namespace recon {

/// Settings shared by every subcommand. Unset endpoints fall back to the
/// in-process implementations.
struct RunConfig {
    std::string corpus;
    std::string index;
    std::string qa;
    std::string logs_dir = "logs";
    std::string reports_dir = "reports";
    std::string system_template;
    std::string policy_script;

    RolloutConfig rollout;
    PPOConfig ppo;
    std::size_t sentence_budget = 2;
    int parallel = 1;

    std::optional<Endpoint> policy_endpoint;
    std::optional<Endpoint> summarizer_endpoint;
    std::optional<Endpoint> retriever_endpoint;

    std::uint64_t seed = 1;

    /// Throws std::invalid_argument; more than one of corpus, index and
    /// retriever_endpoint is an error.
    void validate() const;
};

/// Sets one key. Keys are the names written by `config_keys()`, with
/// rollout.* and ppo.* for the nested blocks. Unknown keys throw.
void apply_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// key = value lines, '#' comments, optional [rollout] / [ppo] sections.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config_file(RunConfig& config, const std::string& path);

/// RECON_SEED, when set, replaces the seed.
void apply_environment(RunConfig& config);

/// Every recognised key with its current value.
std::map<std::string, std::string> config_keys(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);

}  // namespace recon

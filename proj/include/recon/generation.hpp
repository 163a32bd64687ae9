// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "recon/http.hpp"

namespace recon {

struct SamplingParams {
    double temperature = 1.0;
    double top_p = 1.0;
    int top_k = -1;  // -1 disables top-k filtering

    bool operator==(const SamplingParams&) const = default;
};

/// Sampling used when calling a summarizer.
inline constexpr SamplingParams kSummarizerSampling{0.7, 0.9, 40};

struct GenerationRequest {
    std::string prompt;
    int max_tokens = 500;
    SamplingParams sampling;
    std::vector<std::string> stop;
};

/// finish_reason is "stop" (a stop string ended generation), "eos" or
/// "length"; anything else is passed through untouched.
struct GenerationResponse {
    std::string text;
    std::string finish_reason;
};

nlohmann::json to_json(const GenerationRequest& request);
GenerationRequest generation_request_from_json(const nlohmann::json& j);
GenerationResponse generation_response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GenerationResponse& response);

/// Text generation service. Implementations used by batch runners must
/// tolerate concurrent calls.
class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

/// Replays a fixed list of emissions, one per call. Running past the end of
/// the script throws.
class ScriptedBackend final : public GenerationBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> emissions);
    GenerationResponse generate(const GenerationRequest& request) override;
    std::size_t calls() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> emissions_;
    std::size_t next_ = 0;
};

/// Per-question scripts, loaded from JSON lines {question, segments: [text]}.
class ScriptBook {
public:
    static ScriptBook load(const std::string& path);
    void add(std::string question, std::vector<std::string> emissions);
    const std::vector<std::string>& script_for(const std::string& question) const;
    bool contains(const std::string& question) const { return scripts_.count(question) > 0; }

private:
    std::map<std::string, std::vector<std::string>> scripts_;
};

class HttpGenerationBackend final : public GenerationBackend {
public:
    explicit HttpGenerationBackend(Endpoint endpoint,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(60));
    GenerationResponse generate(const GenerationRequest& request) override;
    const Endpoint& endpoint() const { return endpoint_; }

private:
    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
};

}  // namespace recon

// SPDX-License-Identifier: Apache-2.0
#include "recon/generation.hpp"

#include <fstream>
#include <stdexcept>

namespace recon {

nlohmann::json to_json(const GenerationRequest& request)
{
    return {
        {"prompt", request.prompt},
        {"max_tokens", request.max_tokens},
        {"temperature", request.sampling.temperature},
        {"top_p", request.sampling.top_p},
        {"top_k", request.sampling.top_k},
        {"stop", request.stop},
    };
}

GenerationRequest generation_request_from_json(const nlohmann::json& j)
{
    try {
        GenerationRequest r;
        r.prompt = j.at("prompt").get<std::string>();
        r.max_tokens = j.value("max_tokens", r.max_tokens);
        r.sampling.temperature = j.value("temperature", r.sampling.temperature);
        r.sampling.top_p = j.value("top_p", r.sampling.top_p);
        r.sampling.top_k = j.value("top_k", r.sampling.top_k);
        r.stop = j.value("stop", std::vector<std::string>{});
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad generation request: ") + e.what(), payload_excerpt(j.dump()));
    }
}

GenerationResponse generation_response_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
        throw SchemaError("generation response lacks a string 'text' field", payload_excerpt(j.dump()));
    GenerationResponse r;
    r.text = j["text"].get<std::string>();
    if (auto it = j.find("finish_reason"); it != j.end() && it->is_string())
        r.finish_reason = it->get<std::string>();
    return r;
}

nlohmann::json to_json(const GenerationResponse& response)
{
    return {{"text", response.text}, {"finish_reason", response.finish_reason}};
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> emissions) : emissions_(std::move(emissions)) {}

GenerationResponse ScriptedBackend::generate(const GenerationRequest&)
{
    std::lock_guard lock(mutex_);
    if (next_ >= emissions_.size())
        throw std::runtime_error("scripted policy exhausted after " + std::to_string(emissions_.size()) +
                                 " emissions");
    return GenerationResponse{emissions_[next_++], "stop"};
}

std::size_t ScriptedBackend::calls() const
{
    std::lock_guard lock(mutex_);
    return next_;
}

ScriptBook ScriptBook::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open policy script " + path);
    ScriptBook book;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            auto j = nlohmann::json::parse(line);
            book.add(j.at("question").get<std::string>(), j.at("segments").get<std::vector<std::string>>());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path + ", line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return book;
}

void ScriptBook::add(std::string question, std::vector<std::string> emissions)
{
    scripts_[std::move(question)] = std::move(emissions);
}

const std::vector<std::string>& ScriptBook::script_for(const std::string& question) const
{
    auto it = scripts_.find(question);
    if (it == scripts_.end())
        throw std::runtime_error("no policy script for question: " + question);
    return it->second;
}

HttpGenerationBackend::HttpGenerationBackend(Endpoint endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout)
{
}

GenerationResponse HttpGenerationBackend::generate(const GenerationRequest& request)
{
    return generation_response_from_json(post_json(endpoint_, to_json(request), timeout_));
}

}  // namespace recon

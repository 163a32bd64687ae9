// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace recon {

/// Remote endpoint, parsed from "http://host[:port][/path]".
struct Endpoint {
    std::string host;
    int port = 80;
    std::string path = "/";

    static Endpoint parse(std::string_view url);
    std::string url() const;
};

/// Connection refused, timeout, or any failure before a status line arrived.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HttpStatusError : public std::runtime_error {
public:
    HttpStatusError(int status, const std::string& body);
    int status() const { return status_; }

private:
    int status_;
};

/// Body parsed but did not match the expected wire schema.
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& what, std::string excerpt);
    const std::string& excerpt() const { return excerpt_; }

private:
    std::string excerpt_;
};

std::string payload_excerpt(std::string_view body, std::size_t limit = 200);

/// POSTs `body` as JSON and returns the parsed JSON response.
nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace recon

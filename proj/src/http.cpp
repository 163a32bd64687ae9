// SPDX-License-Identifier: Apache-2.0
#include "recon/http.hpp"

#include <httplib.h>

#include <charconv>

namespace recon {

Endpoint Endpoint::parse(std::string_view url)
{
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme)
        throw std::invalid_argument("endpoint must start with http://: " + std::string(url));
    url.remove_prefix(scheme.size());

    Endpoint ep;
    auto slash = url.find('/');
    auto authority = url.substr(0, slash);
    ep.path = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));

    auto colon = authority.rfind(':');
    if (colon == std::string_view::npos) {
        ep.host = std::string(authority);
    } else {
        ep.host = std::string(authority.substr(0, colon));
        auto port_text = authority.substr(colon + 1);
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), ep.port);
        if (ec != std::errc() || ptr != port_text.data() + port_text.size() || ep.port <= 0 || ep.port > 65535)
            throw std::invalid_argument("bad port in endpoint: " + std::string(port_text));
    }
    if (ep.host.empty())
        throw std::invalid_argument("endpoint has no host");
    return ep;
}

std::string Endpoint::url() const
{
    return "http://" + host + ":" + std::to_string(port) + path;
}

HttpStatusError::HttpStatusError(int status, const std::string& body)
    : std::runtime_error("HTTP status " + std::to_string(status) + ": " + payload_excerpt(body)), status_(status)
{
}

SchemaError::SchemaError(const std::string& what, std::string excerpt)
    : std::runtime_error(what + " (payload: " + excerpt + ")"), excerpt_(std::move(excerpt))
{
}

std::string payload_excerpt(std::string_view body, std::size_t limit)
{
    if (body.size() <= limit)
        return std::string(body);
    return std::string(body.substr(0, limit)) + "...";
}

nlohmann::json post_json(const Endpoint& endpoint, const nlohmann::json& body, std::chrono::milliseconds timeout)
{
    httplib::Client client(endpoint.host, endpoint.port);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    auto result = client.Post(endpoint.path, body.dump(), "application/json");
    if (!result)
        throw TransportError("request to " + endpoint.url() + " failed: " + httplib::to_string(result.error()));
    if (result->status < 200 || result->status >= 300)
        throw HttpStatusError(result->status, result->body);

    try {
        return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::parse_error&) {
        throw SchemaError("response from " + endpoint.url() + " is not JSON", payload_excerpt(result->body));
    }
}

}  // namespace recon

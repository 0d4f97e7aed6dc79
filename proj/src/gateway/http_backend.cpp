#include <httplib.h>

#include <cstdlib>
#include <mutex>
#include <regex>

#include "forge/gateway/backend.hpp"

namespace forge::gateway {

ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?)://([A-Za-z0-9._\-]+|\[[0-9A-Fa-f:]+\])(?::([0-9]{1,5}))?(/[^\s]*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError("malformed endpoint '" + url + "'");
    ParsedUrl out;
    out.scheme = m[1];
    out.host = m[2];
    out.port = m[3].matched ? std::stoi(m[3]) : (out.scheme == "https" ? 443 : 80);
    if (out.port <= 0 || out.port > 65535) throw ConfigError("malformed endpoint '" + url + "'");
    out.path = m[4].matched ? std::string(m[4]) : std::string("/");
    return out;
}

struct HttpChatBackend::Endpoint {
    ParsedUrl url;
    std::string bearer;
};

HttpChatBackend::HttpChatBackend(BackendConfig config)
    : config_(std::move(config)), endpoint_(std::make_unique<Endpoint>()) {
    endpoint_->url = parse_url(config_.endpoint);
    if (!config_.api_key_env.empty())
        if (const char* key = std::getenv(config_.api_key_env.c_str())) endpoint_->bearer = key;
}

HttpChatBackend::~HttpChatBackend() = default;

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    const auto& url = endpoint_->url;
    // One client per call: httplib clients are not safe to share across threads.
    httplib::Client client(url.scheme + "://" + url.host + ":" + std::to_string(url.port));
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
    client.set_connection_timeout(static_cast<time_t>(secs));
    client.set_read_timeout(static_cast<time_t>(secs));

    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back(m);
    json body{{"model", config_.model.empty() ? config_.backend_id : config_.model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};

    httplib::Headers headers;
    if (!endpoint_->bearer.empty()) headers.emplace("Authorization", "Bearer " + endpoint_->bearer);

    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500)
        throw TransportError("backend " + config_.backend_id + " returned HTTP " + std::to_string(res->status), true);
    if (res->status != 200)
        throw TransportError("backend " + config_.backend_id + " returned HTTP " + std::to_string(res->status), false);

    ChatResponse out;
    try {
        auto j = json::parse(res->body);
        const auto& choice = j.at("choices").at(0);
        out.content = choice.at("message").at("content").get<std::string>();
        auto finish = choice.value("finish_reason", std::string("stop"));
        out.finish_reason = finish == "length" ? FinishReason::length
                            : finish == "stop" ? FinishReason::stop
                                               : FinishReason::error;
        if (auto u = j.find("usage"); u != j.end()) {
            out.usage.prompt_tokens = u->value("prompt_tokens", 0);
            out.usage.completion_tokens = u->value("completion_tokens", 0);
        }
    } catch (const json::exception& e) {
        throw TransportError("unparseable completion from " + config_.backend_id + ": " + e.what(), true);
    }
    if (out.finish_reason == FinishReason::error)
        throw TransportError("backend " + config_.backend_id + " reported an error finish", true);
    if (out.finish_reason == FinishReason::stop && out.content.empty())
        throw TransportError("backend " + config_.backend_id + " returned empty content", true);
    return out;
}

} // namespace forge::gateway

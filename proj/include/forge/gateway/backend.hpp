#pragma once

#include <functional>
#include <memory>

#include "forge/gateway/chat.hpp"

namespace forge::gateway {

/// One chat-completion provider. Implementations throw TransportError on
/// failure and must be safe to call from several threads at once.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// Deterministic offline backend. The reply is a pure function of the
/// request: it recognises the request tag and produces output that follows
/// that step's reply contract, reading its inputs from the prompt's input
/// blocks. Unknown tags get a short templated reply.
class MockBackend final : public Backend {
public:
    ChatResponse complete(const ChatRequest& request) override;
};

/// Adapts a callable; used for fault injection and instrumentation.
class FunctionBackend final : public Backend {
public:
    using Fn = std::function<ChatResponse(const ChatRequest&)>;
    explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
    ChatResponse complete(const ChatRequest& request) override { return fn_(request); }

private:
    Fn fn_;
};

/// Chat-completions over HTTP(S): POSTs {model, messages, temperature,
/// max_tokens} and reads choices[0].message.content.
class HttpChatBackend final : public Backend {
public:
    explicit HttpChatBackend(BackendConfig config);
    ~HttpChatBackend() override;
    ChatResponse complete(const ChatRequest& request) override;

private:
    struct Endpoint;
    BackendConfig config_;
    std::unique_ptr<Endpoint> endpoint_;
};

struct ParsedUrl {
    std::string scheme;  // http or https
    std::string host;
    int port = 0;
    std::string path;
};

/// Throws ConfigError on anything but scheme://host[:port][/path].
ParsedUrl parse_url(const std::string& url);

ChatResponse make_stop_response(std::string content, const ChatRequest& request);

} // namespace forge::gateway

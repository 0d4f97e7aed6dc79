#include "forge/gateway/chat.hpp"

#include <utility>

#include "forge/common/digest.hpp"
#include "forge/common/jsonl.hpp"
#include "forge/common/text.hpp"
#include "forge/gateway/backend.hpp"

namespace forge::gateway {

namespace {

template <class E, std::size_t N>
std::string_view name_of(E v, const std::pair<E, std::string_view> (&t)[N]) {
    for (const auto& [e, n] : t)
        if (e == v) return n;
    return "unknown";
}

template <class E, std::size_t N>
E parse_from(std::string_view s, const std::pair<E, std::string_view> (&t)[N], const char* what) {
    for (const auto& [e, n] : t)
        if (n == s) return e;
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::pair<MessageRole, std::string_view> kRoles[] = {
    {MessageRole::system, "system"}, {MessageRole::user, "user"}, {MessageRole::assistant, "assistant"}};
constexpr std::pair<FinishReason, std::string_view> kFinish[] = {
    {FinishReason::stop, "stop"}, {FinishReason::length, "length"}, {FinishReason::error, "error"}};
constexpr std::pair<BackendKind, std::string_view> kKinds[] = {{BackendKind::http_chat, "http_chat"},
                                                               {BackendKind::mock, "mock"}};
constexpr std::pair<CacheMode, std::string_view> kModes[] = {{CacheMode::off, "off"},
                                                             {CacheMode::record, "record"},
                                                             {CacheMode::replay, "replay"},
                                                             {CacheMode::replay_then_record, "replay_then_record"}};

} // namespace

std::string_view to_string(MessageRole r) { return name_of(r, kRoles); }
std::string_view to_string(FinishReason r) { return name_of(r, kFinish); }
std::string_view to_string(BackendKind k) { return name_of(k, kKinds); }
std::string_view to_string(CacheMode m) { return name_of(m, kModes); }
MessageRole parse_message_role(std::string_view s) { return parse_from(s, kRoles, "message role"); }
FinishReason parse_finish_reason(std::string_view s) { return parse_from(s, kFinish, "finish reason"); }
BackendKind parse_backend_kind(std::string_view s) { return parse_from(s, kKinds, "backend kind"); }
CacheMode parse_cache_mode(std::string_view s) { return parse_from(s, kModes, "cache mode"); }

void validate_request(const ChatRequest& r) {
    if (r.messages.empty()) throw PreconditionError("chat request has no messages");
    if (r.messages.front().role == MessageRole::assistant)
        throw PreconditionError("chat request must open with a system or user message");
    if (r.temperature < 0) throw PreconditionError("temperature must be non-negative");
    if (r.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
}

void validate_config(const BackendConfig& c) {
    if (c.backend_id.empty()) throw ConfigError("backend_id is empty");
    if (c.max_concurrency < 1) throw ConfigError("max_concurrency must be >= 1");
    if (c.requests_per_minute < 1) throw ConfigError("requests_per_minute must be >= 1");
    if (c.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (c.kind == BackendKind::http_chat) parse_url(c.endpoint);
    if (c.cache_mode != CacheMode::off && c.cache_dir.empty())
        throw ConfigError("backend '" + c.backend_id + "' uses a cache but has no cache_dir");
}

void to_json(json& j, const ChatMessage& m) { j = json{{"role", to_string(m.role)}, {"content", m.content}}; }

void from_json(const json& j, ChatMessage& m) {
    m.role = parse_message_role(j.at("role").get<std::string>());
    m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const ChatRequest& r) {
    j = json{{"backend_id", r.backend_id},
             {"messages", r.messages},
             {"temperature", r.temperature},
             {"max_tokens", r.max_tokens},
             {"request_tag", r.request_tag}};
}

void from_json(const json& j, ChatRequest& r) {
    r.backend_id = j.at("backend_id").get<std::string>();
    r.messages = j.at("messages").get<std::vector<ChatMessage>>();
    r.temperature = j.value("temperature", 0.0);
    r.max_tokens = j.value("max_tokens", 1024);
    r.request_tag = j.value("request_tag", std::string{});
}

void to_json(json& j, const ChatResponse& r) {
    j = json{{"content", r.content},
             {"finish_reason", to_string(r.finish_reason)},
             {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}}};
}

void from_json(const json& j, ChatResponse& r) {
    r.content = j.at("content").get<std::string>();
    r.finish_reason = parse_finish_reason(j.value("finish_reason", std::string("stop")));
    if (auto u = j.find("usage"); u != j.end()) {
        r.usage.prompt_tokens = u->value("prompt_tokens", 0);
        r.usage.completion_tokens = u->value("completion_tokens", 0);
    }
    r.cached = false;
}

BackendConfig backend_config_from_json(const json& j) {
    BackendConfig c;
    try {
        c.backend_id = j.at("backend_id").get<std::string>();
        c.kind = parse_backend_kind(j.value("kind", std::string("mock")));
        c.endpoint = j.value("endpoint", std::string{});
        c.model = j.value("model", std::string{});
        c.api_key_env = j.value("api_key_env", std::string{});
        c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
        c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.cache_mode = parse_cache_mode(j.value("cache_mode", std::string("off")));
        c.cache_dir = j.value("cache_dir", std::string{});
        if (j.contains("timeout_ms")) c.timeout = std::chrono::milliseconds(j.at("timeout_ms").get<long>());
        if (j.contains("backoff_base_ms"))
            c.retry.base_delay = std::chrono::milliseconds(j.at("backoff_base_ms").get<long>());
        if (j.contains("backoff_max_ms"))
            c.retry.max_delay = std::chrono::milliseconds(j.at("backoff_max_ms").get<long>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed backend config: ") + e.what());
    }
    validate_config(c);
    return c;
}

std::vector<BackendConfig> load_backend_configs(const std::filesystem::path& path) {
    auto j = read_json_file(path);
    const json& list = j.is_object() ? j.at("backends") : j;
    std::vector<BackendConfig> out;
    for (const auto& entry : list) {
        auto c = backend_config_from_json(entry);
        if (c.cache_dir.is_relative() && !c.cache_dir.empty()) c.cache_dir = path.parent_path() / c.cache_dir;
        out.push_back(std::move(c));
    }
    return out;
}

json canonical_request(const ChatRequest& r) {
    json messages = json::array();
    for (const auto& m : r.messages)
        messages.push_back({{"role", to_string(m.role)}, {"content", normalize_whitespace(m.content)}});
    return json{{"backend_id", r.backend_id},
                {"messages", messages},
                {"temperature", r.temperature},
                {"max_tokens", r.max_tokens}};
}

std::string request_digest(const ChatRequest& r) { return sha256_hex(canonical_request(r).dump()); }

ReplayMissError::ReplayMissError(std::string tag, std::string digest)
    : Error("replay cache miss for request '" + tag + "' (digest " + digest + ")"),
      tag_(std::move(tag)),
      digest_(std::move(digest)) {}

} // namespace forge::gateway

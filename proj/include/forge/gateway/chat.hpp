#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "forge/common/error.hpp"

namespace forge::gateway {

using json = nlohmann::json;

enum class MessageRole { system, user, assistant };
enum class FinishReason { stop, length, error };
enum class BackendKind { http_chat, mock };
enum class CacheMode { off, record, replay, replay_then_record };

std::string_view to_string(MessageRole r);
std::string_view to_string(FinishReason r);
std::string_view to_string(BackendKind k);
std::string_view to_string(CacheMode m);
MessageRole parse_message_role(std::string_view s);
FinishReason parse_finish_reason(std::string_view s);
BackendKind parse_backend_kind(std::string_view s);
CacheMode parse_cache_mode(std::string_view s);

struct ChatMessage {
    MessageRole role = MessageRole::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string backend_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string request_tag;  // pipeline step name

    bool operator==(const ChatRequest&) const = default;
};

/// Throws PreconditionError when messages are empty or open with an
/// assistant message.
void validate_request(const ChatRequest& r);

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::stop;
    Usage usage;
    bool cached = false;

    bool operator==(const ChatResponse&) const = default;
};

struct RetryPolicy {
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{30000};
    double multiplier = 2.0;
};

struct BackendConfig {
    std::string backend_id;
    BackendKind kind = BackendKind::mock;
    std::string endpoint;     // http_chat only, e.g. http://host:port/v1/chat/completions
    std::string model;        // http_chat only
    std::string api_key_env;  // environment variable holding the bearer token
    int max_concurrency = 4;
    int requests_per_minute = 600;
    int max_retries = 3;
    CacheMode cache_mode = CacheMode::off;
    std::filesystem::path cache_dir;
    RetryPolicy retry;
    std::chrono::milliseconds timeout{120000};
    /// Length of the rate-limit window. Tests shrink it; everything else
    /// keeps the one-minute window implied by requests_per_minute.
    std::chrono::milliseconds rate_window{60000};
};

/// Throws ConfigError on a broken invariant or an unparseable endpoint.
void validate_config(const BackendConfig& c);

void to_json(json& j, const ChatMessage& m);
void from_json(const json& j, ChatMessage& m);
void to_json(json& j, const ChatRequest& r);
void from_json(const json& j, ChatRequest& r);
void to_json(json& j, const ChatResponse& r);
void from_json(const json& j, ChatResponse& r);
BackendConfig backend_config_from_json(const json& j);
std::vector<BackendConfig> load_backend_configs(const std::filesystem::path& path);

/// Canonical form hashed for cache keys: backend id, whitespace-normalized
/// messages, temperature and max_tokens. The request tag is excluded.
json canonical_request(const ChatRequest& r);
std::string request_digest(const ChatRequest& r);

class ReplayMissError : public Error {
public:
    ReplayMissError(std::string tag, std::string digest);
    const std::string& request_tag() const noexcept { return tag_; }
    const std::string& digest() const noexcept { return digest_; }

private:
    std::string tag_;
    std::string digest_;
};

/// Backend failure. `retryable()` distinguishes 429/5xx/network trouble
/// from permanent rejections.
class TransportError : public Error {
public:
    TransportError(const std::string& what, bool retryable) : Error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class DuplicateBackendError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class UnknownBackendError : public Error {
public:
    using Error::Error;
};

} // namespace forge::gateway

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "forge/gateway/backend.hpp"
#include "forge/gateway/cache.hpp"
#include "forge/gateway/chat.hpp"
#include "forge/gateway/rate_limiter.hpp"

namespace forge::gateway {

struct BackendHandle {
    std::string backend_id;
};

struct BackendStats {
    std::size_t requests = 0;
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t retries = 0;
    std::size_t peak_in_flight = 0;
};

/// Uniform chat interface over registered backends.
///
/// Per backend, the gateway enforces the rate limit and concurrency bound,
/// retries transient failures with capped exponential backoff plus jitter,
/// and consults the response cache according to the backend's cache mode.
/// chat() may be called from many threads at once.
class Gateway {
public:
    Gateway();
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    BackendHandle register_backend(const BackendConfig& config);
    /// Registers a caller-supplied implementation under `config`'s limits.
    BackendHandle register_backend(const BackendConfig& config, std::unique_ptr<Backend> impl);

    ChatResponse chat(const ChatRequest& request);

    bool has_backend(const std::string& id) const;
    std::vector<std::string> backend_ids() const;
    BackendStats stats(const std::string& id) const;
    const BackendConfig& config(const std::string& id) const;
    ResponseCache* cache(const std::string& id) const;

private:
    struct Slot;
    Slot& slot(const std::string& id) const;

    mutable std::shared_mutex mu_;
    std::map<std::string, std::unique_ptr<Slot>> slots_;
};

/// Registers every backend listed in a JSON config file.
void register_from_file(Gateway& gw, const std::filesystem::path& path);

} // namespace forge::gateway

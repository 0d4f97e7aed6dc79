#include "forge/gateway/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "forge/common/random.hpp"

namespace forge::gateway {

struct Gateway::Slot {
    Slot(BackendConfig c, std::unique_ptr<Backend> b)
        : config(std::move(c)),
          backend(std::move(b)),
          rate(static_cast<std::size_t>(config.requests_per_minute), config.rate_window),
          concurrency(static_cast<std::size_t>(config.max_concurrency)) {
        if (config.cache_mode != CacheMode::off) cache = std::make_unique<ResponseCache>(config.cache_dir);
    }

    BackendConfig config;
    std::unique_ptr<Backend> backend;
    RateLimiter rate;
    ConcurrencyLimiter concurrency;
    std::unique_ptr<ResponseCache> cache;
    std::atomic<std::size_t> requests{0};
    std::atomic<std::size_t> backend_calls{0};
    std::atomic<std::size_t> cache_hits{0};
    std::atomic<std::size_t> retries{0};
};

Gateway::Gateway() = default;
Gateway::~Gateway() = default;

BackendHandle Gateway::register_backend(const BackendConfig& config) {
    validate_config(config);
    std::unique_ptr<Backend> impl;
    if (config.kind == BackendKind::mock)
        impl = std::make_unique<MockBackend>();
    else
        impl = std::make_unique<HttpChatBackend>(config);
    return register_backend(config, std::move(impl));
}

BackendHandle Gateway::register_backend(const BackendConfig& config, std::unique_ptr<Backend> impl) {
    validate_config(config);
    std::unique_lock lock(mu_);
    if (slots_.contains(config.backend_id))
        throw DuplicateBackendError("backend '" + config.backend_id + "' is already registered");
    slots_.emplace(config.backend_id, std::make_unique<Slot>(config, std::move(impl)));
    return {config.backend_id};
}

Gateway::Slot& Gateway::slot(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = slots_.find(id);
    if (it == slots_.end()) throw UnknownBackendError("backend '" + id + "' is not registered");
    return *it->second;
}

bool Gateway::has_backend(const std::string& id) const {
    std::shared_lock lock(mu_);
    return slots_.contains(id);
}

std::vector<std::string> Gateway::backend_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : slots_) out.push_back(id);
    return out;
}

BackendStats Gateway::stats(const std::string& id) const {
    auto& s = slot(id);
    return {s.requests.load(), s.backend_calls.load(), s.cache_hits.load(), s.retries.load(), s.concurrency.peak()};
}

const BackendConfig& Gateway::config(const std::string& id) const { return slot(id).config; }

ResponseCache* Gateway::cache(const std::string& id) const { return slot(id).cache.get(); }

namespace {

std::chrono::milliseconds backoff_delay(const RetryPolicy& p, int attempt, std::uint64_t jitter_seed) {
    const double ceiling = std::min<double>(static_cast<double>(p.max_delay.count()),
                                            static_cast<double>(p.base_delay.count()) * std::pow(p.multiplier, attempt));
    Rng rng(jitter_seed);
    // Full jitter in [ceiling/2, ceiling].
    const double delay = ceiling * (0.5 + 0.5 * rng.unit());
    return std::chrono::milliseconds(static_cast<long>(delay));
}

} // namespace

ChatResponse Gateway::chat(const ChatRequest& request) {
    validate_request(request);
    auto& s = slot(request.backend_id);
    ++s.requests;

    const std::string digest = request_digest(request);
    const auto mode = s.config.cache_mode;
    if (mode == CacheMode::replay || mode == CacheMode::replay_then_record) {
        if (auto hit = s.cache->lookup(digest)) {
            ++s.cache_hits;
            hit->cached = true;
            return *hit;
        }
        if (mode == CacheMode::replay) throw ReplayMissError(request.request_tag, digest);
    }

    const std::uint64_t jitter_base = derive_seed(std::hash<std::string>{}(digest), "backoff");
    for (int attempt = 0;; ++attempt) {
        s.rate.acquire();
        try {
            ChatResponse response;
            {
                auto permit = s.concurrency.acquire();
                ++s.backend_calls;
                response = s.backend->complete(request);
            }
            response.cached = false;
            if (s.cache && (mode == CacheMode::record || mode == CacheMode::replay_then_record) &&
                response.finish_reason == FinishReason::stop)
                s.cache->store(digest, request, response);
            return response;
        } catch (const TransportError& e) {
            if (!e.retryable() || attempt >= s.config.max_retries)
                throw TransportError("backend '" + request.backend_id + "' failed after " +
                                         std::to_string(attempt + 1) + " attempt(s): " + e.what(),
                                     false);
        }
        ++s.retries;
        std::this_thread::sleep_for(
            backoff_delay(s.config.retry, attempt, derive_seed(jitter_base, std::to_string(attempt))));
    }
}

void register_from_file(Gateway& gw, const std::filesystem::path& path) {
    for (const auto& c : load_backend_configs(path)) gw.register_backend(c);
}

} // namespace forge::gateway

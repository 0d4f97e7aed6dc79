#include "forge/gateway/rate_limiter.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace forge::gateway {

RateLimiter::RateLimiter(std::size_t limit, clock::duration window) : limit_(limit), window_(window) {
    if (limit == 0) throw std::invalid_argument("rate limit must be positive");
}

void RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = clock::now();
        while (!grants_.empty() && now - grants_.front() >= window_) grants_.pop_front();
        if (grants_.size() < limit_) {
            grants_.push_back(now);
            return;
        }
        // Sleep outside the lock until the oldest grant leaves the window.
        const auto wake = grants_.front() + window_;
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
}

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t max_in_flight) : max_(max_in_flight) {
    if (max_in_flight == 0) throw std::invalid_argument("concurrency bound must be positive");
}

ConcurrencyLimiter::Permit ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
    return Permit(*this);
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t ConcurrencyLimiter::in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
}

std::size_t ConcurrencyLimiter::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

} // namespace forge::gateway

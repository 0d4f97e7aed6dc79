#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>

namespace forge::gateway {

/// Sliding-window limiter: at most `limit` acquisitions in any window of
/// length `window`. acquire() blocks until a slot is free.
class RateLimiter {
public:
    using clock = std::chrono::steady_clock;

    RateLimiter(std::size_t limit, clock::duration window);

    void acquire();

private:
    std::mutex mu_;
    std::size_t limit_;
    clock::duration window_;
    std::deque<clock::time_point> grants_;
};

/// Counting semaphore with a runtime bound and an in-flight high-water mark.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(std::size_t max_in_flight);

    class Permit {
    public:
        explicit Permit(ConcurrencyLimiter& owner) : owner_(&owner) {}
        Permit(Permit&& other) noexcept : owner_(other.owner_) { other.owner_ = nullptr; }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit() {
            if (owner_) owner_->release();
        }

    private:
        ConcurrencyLimiter* owner_;
    };

    Permit acquire();
    std::size_t in_flight() const;
    std::size_t peak() const;

private:
    void release();

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::size_t max_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
};

} // namespace forge::gateway

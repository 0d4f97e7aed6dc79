#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

namespace forge {

/// Applies `fn` to every item using up to `workers` threads. Results come
/// back in input order. The first exception (by item index) is rethrown
/// after all workers finish.
template <class In, class Fn>
auto parallel_map(std::span<const In> items, std::size_t workers, Fn fn)
    -> std::vector<std::invoke_result_t<Fn&, const In&>> {
    using Out = std::invoke_result_t<Fn&, const In&>;
    std::vector<std::optional<Out>> slots(items.size());
    std::vector<std::exception_ptr> errors(items.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            try {
                slots[i].emplace(fn(items[i]));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(items.size(), 1));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<Out> out;
    out.reserve(items.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

template <class In, class Fn>
auto parallel_map(const std::vector<In>& items, std::size_t workers, Fn fn) {
    return parallel_map(std::span<const In>(items), workers, std::move(fn));
}

} // namespace forge

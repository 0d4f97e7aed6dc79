#pragma once

// Deterministic randomness.
//
// Seeds are split with SplitMix64 keyed by a label, and every stream is a
// std::mt19937_64 engine (its output sequence is fixed by the C++ standard).
// Bounded draws and shuffles are implemented here instead of going through
// <random> distributions, whose algorithms differ between standard libraries.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace forge {

std::uint64_t splitmix64(std::uint64_t& state);

/// Child seed for a named sub-stream of `parent`.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 random bits.
    double unit();

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    template <class T>
    void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

private:
    std::mt19937_64 engine_;
};

/// `n` distinct indices from [0, pool_size), returned in ascending order.
std::vector<std::size_t> choose_indices(std::size_t pool_size, std::size_t n, std::uint64_t seed);

} // namespace forge

#include "forge/common/random.hpp"
#include "forge/common/error.hpp"

#include <algorithm>
#include <numeric>


namespace forge {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) {
    // FNV-1a over the label, folded into the parent before mixing.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t state = parent ^ h;
    splitmix64(state);
    return splitmix64(state);
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw PreconditionError("Rng::below: bound must be positive");
    // Reject the tail that would bias the modulo.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> choose_indices(std::size_t pool_size, std::size_t n, std::uint64_t seed) {
    if (n > pool_size) throw PreconditionError("choose_indices: n exceeds pool size");
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    // Partial Fisher-Yates: the first n slots are a uniform n-subset.
    for (std::size_t i = 0; i < n; ++i) {
        auto j = i + static_cast<std::size_t>(rng.below(pool_size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace forge

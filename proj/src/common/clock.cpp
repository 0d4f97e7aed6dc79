#include "forge/common/clock.hpp"

#include <chrono>

namespace forge {

Clock system_clock_ms() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

Clock fixed_clock(std::int64_t epoch_ms) {
    return [epoch_ms] { return epoch_ms; };
}

} // namespace forge

#pragma once

#include <cstdint>
#include <functional>

namespace forge {

/// Milliseconds since the Unix epoch.
using Clock = std::function<std::int64_t()>;

Clock system_clock_ms();

/// Always returns `epoch_ms`. Pipeline runs use this so provenance
/// timestamps do not perturb output digests.
Clock fixed_clock(std::int64_t epoch_ms);

} // namespace forge

#pragma once

#include <span>
#include <string>

namespace forge {

/// Order-independent sum: values are sorted before Neumaier-compensated
/// accumulation, so any permutation of the input yields the same bits.
double stable_sum(std::span<const double> values);

/// stable_sum / size. Empty input yields 0.
double stable_mean(std::span<const double> values);

/// Fixed-point rendering rounding half away from zero on the decimal
/// expansion (4.595 renders as "4.60" at 2 decimals even though the nearest
/// double lies just below 4.595).
std::string format_half_up(double value, int decimals);

} // namespace forge

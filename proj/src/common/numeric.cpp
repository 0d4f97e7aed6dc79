#include "forge/common/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace forge {

double stable_sum(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    double compensation = 0.0;
    for (double v : sorted) {
        double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v))
            compensation += (sum - t) + v;
        else
            compensation += (v - t) + sum;
        sum = t;
    }
    return sum + compensation;
}

double stable_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return stable_sum(values) / static_cast<double>(values.size());
}

std::string format_half_up(double value, int decimals) {
    if (decimals < 0 || decimals > 12) throw std::invalid_argument("format_half_up: decimals out of range");
    if (!std::isfinite(value)) return std::to_string(value);

    // Six guard digits absorb binary representation error before rounding.
    const int guard = 6;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals + guard, std::fabs(value));
    std::string digits(buf);
    const auto dot = digits.find('.');
    std::string integral = digits.substr(0, dot);
    std::string fraction = digits.substr(dot + 1);

    std::string kept = integral + fraction.substr(0, static_cast<std::size_t>(decimals));
    const bool round_up = fraction[static_cast<std::size_t>(decimals)] >= '5';
    if (round_up) {
        int i = static_cast<int>(kept.size()) - 1;
        while (i >= 0) {
            if (kept[static_cast<std::size_t>(i)] == '9') {
                kept[static_cast<std::size_t>(i)] = '0';
                --i;
            } else {
                ++kept[static_cast<std::size_t>(i)];
                break;
            }
        }
        if (i < 0) kept.insert(kept.begin(), '1');
    }

    const std::size_t int_len = kept.size() - static_cast<std::size_t>(decimals);
    std::string out = kept.substr(0, int_len);
    if (decimals > 0) out += "." + kept.substr(int_len);

    const bool all_zero = std::all_of(kept.begin(), kept.end(), [](char c) { return c == '0'; });
    if (value < 0 && !all_zero) out.insert(out.begin(), '-');
    return out;
}

} // namespace forge

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ebsig/errors.hpp"

namespace ebsig {

// Linear-interpolation sample quantile (R type 7) of an ascending sequence.
inline double type7_quantile(std::span<const double> sorted, double prob) {
    if (sorted.empty()) throw UsageError("quantile of an empty sequence");
    if (!(prob >= 0.0 && prob <= 1.0))
        throw UsageError("quantile probability must lie in [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Same, for data that still needs sorting.
inline double type7_quantile_unsorted(std::vector<double> values, double prob) {
    std::sort(values.begin(), values.end());
    return type7_quantile(values, prob);
}

}  // namespace ebsig

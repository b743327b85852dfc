#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sigexec::stats {

/// Pairwise (fixed binary tree) summation; the association order depends only on n.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
    return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Population variance (divide by n).
inline double variance(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
    return pairwise_sum(sq) / static_cast<double>(xs.size());
}

/// Standard error of the mean (sample standard deviation / sqrt(n)).
inline double standard_error(std::span<const double> xs) {
    const auto n = static_cast<double>(xs.size());
    if (n < 2) return 0.0;
    return std::sqrt(variance(xs) * n / (n - 1.0) / n);
}

} // namespace sigexec::stats

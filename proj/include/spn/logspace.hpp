#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace spn {

/// Sentinel for log(0). All node values travel through the library in
/// natural-log space; a probability of zero is exactly -infinity here.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double lv) { return std::isinf(lv) && lv < 0; }

/// log(exp(a) + exp(b)) with the usual max shift.
inline double log_add(double a, double b) {
    if (is_log_zero(a)) return b;
    if (is_log_zero(b)) return a;
    double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// log(sum_j w[j] * exp(lv[j])) for non-negative weights. Terms with
/// w[j] == 0 are skipped so that a zero weight silences even a -inf value.
inline double weighted_log_sum_exp(std::span<const double> weights,
                                   std::span<const double> lv) {
    double m = kLogZero;
    for (size_t j = 0; j < weights.size(); ++j)
        if (weights[j] > 0.0 && lv[j] > m) m = lv[j];
    if (is_log_zero(m)) return kLogZero;
    double acc = 0.0;
    for (size_t j = 0; j < weights.size(); ++j)
        if (weights[j] > 0.0) acc += weights[j] * std::exp(lv[j] - m);
    return m + std::log(acc);
}

/// Gaussian log density.
inline double gaussian_log_pdf(double x, double mean, double variance) {
    static const double kLogTwoPi = std::log(2.0 * M_PI);
    double d = x - mean;
    return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

}  // namespace spn

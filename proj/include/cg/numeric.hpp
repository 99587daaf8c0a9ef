#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace cg {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum(exp(v))) with max-shift stabilization. Returns -inf for an empty
/// span or when every entry is -inf.
inline double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline double log_sum_exp(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double relative_error(double got, double want) {
    double denom = std::max(std::abs(want), 1e-300);
    return std::abs(got - want) / denom;
}

}  // namespace cg

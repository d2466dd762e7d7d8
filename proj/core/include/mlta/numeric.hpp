#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace mlta {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
    if (x <= -37.0) return std::exp(x);
    if (x <= 18.0) return std::log1p(std::exp(x));
    if (x <= 33.3) return x + std::exp(-x);
    return x;
}

inline double log_sigmoid(double x) { return -softplus(-x); }

/// Jaakkola-Jordan curvature (1/2 - sigmoid(xi)) / (2 xi), even in xi.
/// Near zero the series -1/8 + xi^2/96 replaces the 0/0 form.
inline double jj_lambda(double xi) {
    const double a = std::abs(xi);
    if (a < 1e-4) {
        return -0.125 + a * a / 96.0;
    }
    return -std::tanh(0.5 * a) / (4.0 * a);
}

inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double hi = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace mlta

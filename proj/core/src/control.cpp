#include "mlta/control.hpp"

#include <cmath>

#include "mlta/errors.hpp"

namespace mlta {

void FitControl::validate() const {
    if (!(tol > 0.0)) throw ArgumentError("tol must be positive");
    if (max_iter < 1) throw ArgumentError("max_iter must be >= 1");
    if (n_starts < 1) throw ArgumentError("n_starts must be >= 1");
    if (final_quadrature_q < 1) throw ArgumentError("final_quadrature_q must be >= 1");
    if (inner_sweeps < 1) throw ArgumentError("inner_sweeps must be >= 1");
}

namespace {

// Projected limit from (prev, cur, next); nullopt-like NaN when 1 - a vanishes.
double projected(double prev, double cur, double next) {
    const double a = (next - cur) / (cur - prev);
    const double denom = 1.0 - a;
    if (std::abs(denom) < 1e-12) return std::nan("");
    return cur + (next - cur) / denom;
}

}  // namespace

bool aitken_stop(std::span<const double> trace, double tol) {
    const std::size_t n = trace.size();
    if (n < 3) return false;
    const double l1 = trace[n - 3];
    const double l2 = trace[n - 2];
    const double l3 = trace[n - 1];
    if (l2 == l1 || l3 == l2) return true;
    if (n < 4) return false;
    const double l0 = trace[n - 4];
    if (l1 == l0) return true;
    const double next = projected(l1, l2, l3);
    const double prev = projected(l0, l1, l2);
    if (std::isnan(next) || std::isnan(prev)) return false;
    return std::abs(next - prev) < tol;
}

}  // namespace mlta

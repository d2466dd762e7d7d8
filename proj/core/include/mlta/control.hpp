#pragma once

#include <cstdint>
#include <span>

namespace mlta {

struct FitControl {
    double tol = 1e-2;          ///< Aitken tolerance on the projected log-likelihood
    int max_iter = 5000;
    std::uint64_t seed = 0;
    int n_starts = 10;
    int final_quadrature_q = 5; ///< Gauss-Hermite points per trait dimension
    int inner_sweeps = 1;       ///< (xi, posterior) sweeps per outer iteration
    unsigned threads = 0;       ///< 0 = hardware concurrency

    /// Throws ArgumentError on tol <= 0, n_starts < 1, max_iter < 1,
    /// final_quadrature_q < 1 or inner_sweeps < 1.
    void validate() const;
};

/// Aitken-accelerated stopping rule on a log-likelihood trace.
///
/// With l0..l3 the last four values, a = (l3 - l2) / (l2 - l1) and
/// lA = l2 + (l3 - l2) / (1 - a); the rule stops when successive projected
/// limits differ by less than tol. A flat step (zero denominator) counts as
/// converged. Fewer than four values can only stop through a flat step.
bool aitken_stop(std::span<const double> trace, double tol);

}  // namespace mlta

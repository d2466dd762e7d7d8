#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta::testing {

/// Random parameters: b ~ U(-scale_b, scale_b), w ~ U(-scale_w, scale_w),
/// eta drawn from a flat Dirichlet.
inline MltaParameters random_params(const ModelSpec& spec, int n_vars, std::uint64_t seed, double scale_b = 2.0,
                                    double scale_w = 1.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ub(-scale_b, scale_b), uw(-scale_w, scale_w);
    std::exponential_distribution<double> ex(1.0);
    MltaParameters p = MltaParameters::zeros(spec, n_vars);
    for (Eigen::Index i = 0; i < p.intercept.size(); ++i) p.intercept.data()[i] = ub(rng);
    for (auto& w : p.slopes) {
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uw(rng);
    }
    for (int g = 0; g < spec.groups; ++g) p.eta[g] = 0.2 + ex(rng);
    p.eta /= p.eta.sum();
    return p;
}

/// Uniform random 0/1 matrix.
inline BinaryData random_data(std::size_t n_rows, std::size_t n_vars, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint8_t> cells(n_rows * n_vars);
    for (auto& c : cells) c = coin(rng) ? 1 : 0;
    return BinaryData(n_vars, std::move(cells), std::vector<double>(n_rows, 1.0));
}

/// Every one of the 2^M patterns once, lexicographic order.
inline BinaryData all_patterns(int n_vars) {
    std::vector<std::uint8_t> cells;
    const int count = 1 << n_vars;
    for (int p = 0; p < count; ++p) {
        for (int m = 0; m < n_vars; ++m) cells.push_back(static_cast<std::uint8_t>((p >> (n_vars - 1 - m)) & 1));
    }
    return BinaryData(static_cast<std::size_t>(n_vars), std::move(cells),
                      std::vector<double>(static_cast<std::size_t>(count), 1.0));
}

}  // namespace mlta::testing

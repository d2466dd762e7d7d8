#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta {

/// Discrete approximation of N(0, I_D): points (one per row) and positive
/// weights summing to one.
struct QuadratureRule {
    int dim = 0;
    Eigen::MatrixXd points;  // Q x D
    Eigen::VectorXd weights;

    Eigen::Index size() const noexcept { return weights.size(); }
};

/// Gauss-Hermite rule for the standard normal density (probabilists'
/// convention). Exact for polynomials of degree up to 2Q - 1.
QuadratureRule hermite_rule(int q_points);

/// Q^D product grid built from a one-dimensional rule.
QuadratureRule tensor_grid(const QuadratureRule& rule, int dim);

/// Convenience: tensor_grid(hermite_rule(q_points), dim).
QuadratureRule hermite_grid(int q_points, int dim);

/// N x G matrix of log p(x_n | z_ng = 1), integrating the trait with `rule`.
/// For D = 0 the rule is ignored and the exact Bernoulli product is returned.
Eigen::MatrixXd component_log_density(const BinaryData& data, const MltaParameters& params,
                                      const QuadratureRule& rule);

/// Per-row log p(x_n) (unweighted), mixing over groups.
Eigen::VectorXd row_log_likelihood(const BinaryData& data, const MltaParameters& params,
                                   const QuadratureRule& rule);

/// Weighted log-likelihood by Gauss-Hermite quadrature.
double gh_loglik(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule);

/// Exact log-likelihood of a D = 0 (latent class) parameter set.
double lca_form_loglik(const BinaryData& data, const MltaParameters& params);

struct MonteCarloEstimate {
    double loglik = 0.0;
    double std_error = 0.0;  ///< delta-method standard error across draws
};

/// Monte Carlo log-likelihood with `draws` common standard-normal draws.
MonteCarloEstimate mc_loglik_detail(const BinaryData& data, const MltaParameters& params, int draws,
                                    std::uint64_t seed);
double mc_loglik(const BinaryData& data, const MltaParameters& params, int draws, std::uint64_t seed);

/// Brute-force trapezoid integration over [-halfwidth, halfwidth]^D, D in {1,2}.
double oracle_loglik(const BinaryData& data, const MltaParameters& params, double halfwidth, int grid_points);

}  // namespace mlta

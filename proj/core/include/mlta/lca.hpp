#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "mlta/control.hpp"
#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta {

/// Latent class parameters: eta (G) and response probabilities pi (M x G).
struct LcaParameters {
    Eigen::VectorXd eta;
    Eigen::MatrixXd pi;
};

/// Starting point for the latent class EM. Precedence: params, then z, then a
/// seeded uniform random hard assignment of rows to groups.
struct InitPolicy {
    std::uint64_t seed = 0;
    std::optional<Eigen::MatrixXd> z;
    std::optional<LcaParameters> params;
};

struct LcaFit {
    LcaParameters params;
    double loglik = 0.0;
    Eigen::MatrixXd z;            // N x G responsibilities
    std::vector<double> trace;    // log-likelihood after each E-step
    int n_iter = 0;
    bool converged = false;
    bool saturated = false;       // some pi hit the [1e-10, 1 - 1e-10] clamp
};

inline constexpr double kPiClamp = 1e-10;

/// Exact EM for latent class analysis. Throws ArgumentError on empty data or
/// G < 1, DegenerateGroup when a class's expected size drops below one.
LcaFit fit_lca(const BinaryData& data, int groups, const InitPolicy& init, const FitControl& ctrl);

/// Exact latent class log-likelihood.
double lca_loglik(const BinaryData& data, const LcaParameters& params);

/// Intercept-form view (b = logit pi, no slopes) of latent class parameters.
MltaParameters to_mlta(const LcaParameters& params);

/// Uniform random hard assignment of each row to one of G groups.
Eigen::MatrixXd random_assignment(std::size_t n_rows, int groups, std::uint64_t seed);

}  // namespace mlta

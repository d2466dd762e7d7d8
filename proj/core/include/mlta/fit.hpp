#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlta/control.hpp"
#include "mlta/data.hpp"
#include "mlta/model.hpp"
#include "mlta/variational.hpp"

namespace mlta {

struct FitReport {
    ModelSpec spec;
    std::vector<double> bound_trace;  ///< variational log-likelihood per outer iteration
    double loglik_bound = 0.0;        ///< bound at the fitted parameters, xi at its fixed point (exact when D = 0)
    double loglik_gh = 0.0;           ///< Gauss-Hermite log-likelihood (exact when D = 0)
    int quadrature_q = 0;
    int k = 0;
    int k_star = 0;
    double bic = 0.0;
    double bic_star = 0.0;
    double n_obs = 0.0;
    int n_iter = 0;
    bool converged = false;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
    std::vector<int> classification;  ///< MAP group per row, zero-based
};

struct MltaFit {
    MltaParameters params;
    VariationalState state;
    FitReport report;
};

/// Warm start for a fit: parameters plus responsibilities (and optionally xi).
struct WarmStart {
    MltaParameters params;
    Eigen::MatrixXd z;
    std::vector<Eigen::MatrixXd> xi;  ///< empty: xi starts at kInitialXi
};

inline constexpr double kInitialXi = 20.0;

/// Cap on the xi/posterior sweeps run at the fitted parameters after the last iteration.
inline constexpr int kFinalXiSweeps = 500;

/// Variational double-EM from a seeded random start. D = 0 runs the exact
/// latent class EM. Groups in the result are sorted by decreasing eta.
/// Throws DegenerateGroup if a group's expected size drops below one.
MltaFit fit_mlta(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl);

/// Same iteration, started from the given state.
MltaFit fit_mlta_from(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl, const WarmStart& start);

/// Seeded random start: z by uniform hard assignment, b and w standard normal.
WarmStart random_start(const BinaryData& data, const ModelSpec& spec, std::uint64_t seed);

/// Fills the k/k*, BIC/BIC* fields of a report from its loglik_gh and eta.
void finalize_criteria(FitReport& report, const MltaParameters& params, int n_vars);

}  // namespace mlta

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"

namespace mlta {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// log of the Jaakkola-Jordan lower bound on p(x | y) for one response:
/// log sigma(xi) + (A - xi)/2 + lambda(xi)(A^2 - xi^2), A = (2x - 1)(b + w'y).
/// Equals log sigma(A) when xi = |A|.
double variational_term(int x, double intercept, const Eigen::Ref<const Eigen::VectorXd>& slope,
                        const Eigen::Ref<const Eigen::VectorXd>& trait, double xi);

/// z_ng proportional to eta_g exp(L_ng), normalised with log-sum-exp.
Eigen::MatrixXd estep_responsibilities(const Eigen::VectorXd& eta, const Eigen::MatrixXd& bounds);

/// Gaussian approximation N(mean, cov) to p(y | x, z_g = 1) under the bound.
struct PosteriorMoments {
    Eigen::MatrixXd cov;
    Eigen::VectorXd mean;
};

/// cov = [I - 2 sum_m lambda(xi_m) w_m w_m']^-1,
/// mean = cov sum_m (x_m - 1/2 + 2 lambda(xi_m) b_m) w_m.
PosteriorMoments posterior_update(std::span<const std::uint8_t> x_row, const MltaParameters& params, int g,
                                  const Eigen::Ref<const Eigen::VectorXd>& xi_row);

/// Positive root of w'(C + mu mu')w + 2 b w'mu + b^2, the posterior second
/// moment of b + w'y.
double xi_update(const MltaParameters& params, int g, int m, const Eigen::Ref<const Eigen::MatrixXd>& cov,
                 const Eigen::Ref<const Eigen::VectorXd>& mean);

/// Closed-form log of the integrated bound for one row and group.
double lower_bound(std::span<const std::uint8_t> x_row, const MltaParameters& params, int g,
                   const Eigen::Ref<const Eigen::VectorXd>& xi_row, const Eigen::Ref<const Eigen::MatrixXd>& cov,
                   const Eigen::Ref<const Eigen::VectorXd>& mean);

/// Responses centred at 1/2 and row weights, the form every update consumes.
struct Responses {
    Eigen::MatrixXd centered;  // N x M, x - 1/2
    Eigen::VectorXd weights;   // N

    explicit Responses(const BinaryData& data);

    Eigen::Index n_rows() const noexcept { return centered.rows(); }
    Eigen::Index n_vars() const noexcept { return centered.cols(); }
};

/// Working set of one variational fit. Per-group blocks are indexed by g.
struct VariationalState {
    Eigen::MatrixXd z;                   // N x G responsibilities
    std::vector<Eigen::MatrixXd> xi;     // N x M variational parameters (> 0)
    std::vector<Eigen::MatrixXd> lambda; // N x M, lambda(xi)
    std::vector<Eigen::MatrixXd> mu;     // N x D posterior means
    std::vector<RowMatrixXd> cov;        // N x D^2; row n holds C_ng column-major
    Eigen::MatrixXd log_det_cov;         // N x G
    Eigen::MatrixXd mean_quad;           // N x G, mu' C^-1 mu
    Eigen::MatrixXd bound;               // N x G, L(xi_ng)

    /// Allocates blocks with xi set to `xi0` everywhere and zero moments.
    static VariationalState init(Eigen::Index n_rows, Eigen::Index n_vars, int groups, int dim, double xi0);

    int groups() const noexcept { return static_cast<int>(xi.size()); }
    Eigen::MatrixXd covariance(Eigen::Index n, int g) const;

    /// Reorders the group blocks: new block i is old block order[i].
    void permute_groups(const std::vector<int>& order);
};

/// Recomputes mu, cov, log|C| and mu'C^-1 mu for every (n, g) from the
/// current xi and parameters. Throws NumericalError if a precision matrix is
/// not positive definite.
void update_posteriors(const Responses& resp, const MltaParameters& params, VariationalState& state);

/// Sets every xi to the posterior root-mean-square of b + w'y.
void update_xi(const MltaParameters& params, VariationalState& state);

/// Recomputes L(xi_ng) from xi, parameters and the stored moments.
void update_bounds(const Responses& resp, const MltaParameters& params, VariationalState& state);

/// sum_n w_n log sum_g eta_g exp(L_ng).
double variational_loglik(const Responses& resp, const Eigen::VectorXd& eta, const Eigen::MatrixXd& bounds);

struct MStepInfo {
    int pseudo_inverse_solves = 0;  ///< systems that were not positive definite
    int clamped_intercepts = 0;     ///< intercepts pulled back to |b| <= kInterceptLimit
};

inline constexpr double kInterceptLimit = 35.0;

/// Per-(m, g) solve of the (D+1)-dimensional system for (w_mg, b_mg).
MStepInfo mstep_free(const Responses& resp, const VariationalState& state, MltaParameters& params);

/// Per-m solve of the (D+G)-dimensional system for (w_m, b_m1..b_mG).
MStepInfo mstep_common(const Responses& resp, const VariationalState& state, MltaParameters& params);

}  // namespace mlta

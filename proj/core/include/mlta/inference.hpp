#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlta/control.hpp"
#include "mlta/data.hpp"
#include "mlta/fit.hpp"
#include "mlta/model.hpp"

namespace mlta {

/// MAP group per row (zero-based); ties go to the lowest index.
std::vector<int> classify_map(const Eigen::MatrixXd& z);

struct MultiStartResult {
    MltaFit best;
    std::vector<std::optional<double>> start_logliks;  ///< final GH loglik per start; empty if it failed
    std::vector<std::optional<MltaParameters>> start_params;
    std::vector<std::string> failures;                 ///< one message per failed start
    int best_start = 0;
};

/// Runs ctrl.n_starts fits with seeds ctrl.seed + s and keeps the one with
/// the largest GH log-likelihood. Throws AllStartsFailed if none succeeds.
MultiStartResult multi_start_fit(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl);

struct Simulation {
    BinaryData data;
    std::vector<int> z;  ///< true group per row, zero-based
    Eigen::MatrixXd y;   ///< N x D true traits
};

/// Draws N rows from the model. Deterministic in seed.
Simulation simulate(const MltaParameters& params, std::size_t n_rows, std::uint64_t seed);

struct GridRow {
    ModelSpec spec;
    double loglik = 0.0;
    int k = 0;
    int k_star = 0;
    double bic = 0.0;
    double bic_star = 0.0;
    bool converged = false;
    bool failed = false;
    std::vector<std::string> warnings;
    std::optional<MltaParameters> params;
};

struct GridResult {
    std::vector<GridRow> rows;
    std::optional<ModelSpec> best_by_bic;
    std::optional<ModelSpec> best_by_bic_star;
};

/// Specs visited by a grid search, in row order. COMMON is folded into FREE
/// when G = 1 or D = 0, and duplicates are dropped.
std::vector<ModelSpec> grid_specs(const std::vector<int>& groups, const std::vector<int>& dims,
                                  const std::vector<SlopeMode>& modes);

/// One multi-start fit per spec; failures are recorded in the row.
GridResult grid_search(const BinaryData& data, const std::vector<int>& groups, const std::vector<int>& dims,
                       const std::vector<SlopeMode>& modes, const FitControl& ctrl);

/// Assignment maximizing sum_g score(g, perm[g]) for a square score matrix.
std::vector<int> max_assignment(const Eigen::MatrixXd& score);

/// Permutation mapping groups of `z` onto those of `z_ref` by maximum
/// weighted overlap: group g of the reference corresponds to group perm[g].
std::vector<int> align_groups(const Eigen::MatrixXd& z_ref, const Eigen::MatrixXd& z,
                              const Eigen::VectorXd& weights);

struct JackknifeOptions {
    int max_iter = 20;  ///< iterations per warm-started delete-one refit
    int stride = 1;     ///< refit every stride-th distinct row
};

struct JackknifeReport {
    Eigen::VectorXd se_eta;
    Eigen::MatrixXd se_b;                  ///< M x G
    std::vector<Eigen::MatrixXd> se_w;     ///< shaped like the slopes
    Eigen::MatrixXd se_median_prob;        ///< M x G, SE of sigma(b)
    int n_refits = 0;                      ///< successful delete-one refits (distinct rows)
    int n_requested = 0;
    std::vector<std::string> warnings;
};

/// Delete-one jackknife standard errors, each refit warm-started at `fitted`
/// and aligned to it by maximum responsibility overlap.
JackknifeReport jackknife_se(const BinaryData& data, const MltaFit& fitted, const FitControl& ctrl,
                             const JackknifeOptions& options = {});

struct IdentifiabilityOptions {
    double loglik_tol = 1e-3;  ///< starts within this of the best count as reaching the maximum
    double param_tol = 1e-2;   ///< max abs difference in invariant parameters
    double se_flag = 2.0;      ///< jackknife SE above this is flagged
    bool jackknife = true;
    JackknifeOptions jackknife_options;
};

struct IdentifiabilityReport {
    std::vector<std::optional<double>> start_logliks;
    double loglik_spread = 0.0;  ///< max - min over successful starts
    int starts_at_max = 0;
    bool distinct_optima = false;
    std::vector<std::string> high_se;  ///< parameters whose SE exceeds se_flag
    int k = 0;
    double n_patterns = 0.0;           ///< 2^M
    bool count_condition = false;      ///< k < 2^M
    std::vector<std::string> flags;
};

IdentifiabilityReport identifiability_report(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl,
                                             const IdentifiabilityOptions& options = {});

/// Rand index between two labelings of the same rows.
double rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace mlta

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mlta/data.hpp"
#include "mlta/model.hpp"
#include "mlta/quadrature.hpp"

namespace mlta {

struct InformationCriteria {
    double bic = 0.0;
    double bic_star = 0.0;
};

/// BIC = -2 loglik + k log N; BIC* = BIC + k* sum_g log eta_g.
InformationCriteria information_criteria(double loglik, int k, int k_star, const Eigen::VectorXd& eta, double n_obs);

struct ExpectedCount {
    std::string pattern;
    double observed = 0.0;
    double expected = 0.0;
};

/// N p(x) for each listed pattern, with N the summed observed counts.
std::vector<ExpectedCount> expected_frequencies(const std::vector<PatternCount>& patterns,
                                                const MltaParameters& params, const QuadratureRule& rule);

/// Pearson statistic over observed patterns plus the unobserved remainder
/// (n_total - sum of expected).
double pearson_statistic(const std::vector<ExpectedCount>& counts, double n_total);

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;                ///< 2^M - k - 1
    std::optional<double> p_value;   ///< only when the test is applicable
    bool applicable = false;         ///< M <= 25, dof > 0 and every observed E >= 5
    double min_expected = 0.0;
};

ChiSquareResult chi_square_test(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule);

/// Sum of squared Pearson residuals over patterns observed at least `threshold` times.
double truncated_sspr(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule,
                      double threshold);

struct SsprEntry {
    double threshold = 0.0;
    double value = 0.0;
    int n_patterns = 0;
};

std::vector<SsprEntry> sspr_table(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule,
                                  const std::vector<double>& thresholds = {100.0, 25.0, 10.0});

/// Within-group lift P(x_m=1, x_k=1) / (P(x_m=1) P(x_k=1)) by quadrature.
/// Symmetric M x M with a unit diagonal; all ones when D = 0.
Eigen::MatrixXd lift_matrix(const MltaParameters& params, int g, const QuadratureRule& rule);

/// w* = w / sqrt(1 + |w_m|^2) row-wise; entries lie in (-1, 1).
Eigen::MatrixXd standardize_slopes(const Eigen::MatrixXd& slopes);

/// sigma(b), the response probability of the median individual.
Eigen::MatrixXd median_probabilities(const Eigen::MatrixXd& intercepts);

struct FitDiagnostics {
    double bic = 0.0;
    double bic_star = 0.0;
    std::optional<ChiSquareResult> chi_sq;
    std::vector<SsprEntry> sspr;
    Eigen::MatrixXd median_probs;
    std::vector<Eigen::MatrixXd> std_slopes;  ///< per group (one entry in COMMON mode)
    std::vector<Eigen::MatrixXd> lift;        ///< per group
};

FitDiagnostics diagnose(const BinaryData& data, const MltaParameters& params, double loglik, int quadrature_q,
                        const std::vector<double>& sspr_thresholds = {100.0, 25.0, 10.0});

}  // namespace mlta

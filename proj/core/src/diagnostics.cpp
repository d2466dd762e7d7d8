#include "mlta/diagnostics.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mlta/errors.hpp"
#include "mlta/numeric.hpp"

namespace mlta {

namespace {

BinaryData patterns_as_rows(const std::vector<PatternCount>& patterns, std::size_t n_vars) {
    std::vector<std::uint8_t> cells;
    cells.reserve(patterns.size() * n_vars);
    for (const auto& p : patterns) {
        if (p.pattern.size() != n_vars) throw ArgumentError("pattern length does not match the model");
        for (char ch : p.pattern) cells.push_back(ch == '1' ? 1 : 0);
    }
    return BinaryData(n_vars, std::move(cells), std::vector<double>(patterns.size(), 1.0));
}

}  // namespace

InformationCriteria information_criteria(double loglik, int k, int k_star, const Eigen::VectorXd& eta, double n_obs) {
    if (!(n_obs >= 1.0)) throw ArgumentError("information criteria need N >= 1");
    if (eta.size() == 0 || (eta.array() <= 0.0).any()) {
        throw ArgumentError("information criteria need strictly positive mixing proportions");
    }
    InformationCriteria ic;
    ic.bic = -2.0 * loglik + k * std::log(n_obs);
    ic.bic_star = ic.bic + k_star * eta.array().log().sum();
    return ic;
}

std::vector<ExpectedCount> expected_frequencies(const std::vector<PatternCount>& patterns,
                                                const MltaParameters& params, const QuadratureRule& rule) {
    std::vector<ExpectedCount> out;
    if (patterns.empty()) return out;
    double n_total = 0.0;
    for (const auto& p : patterns) n_total += p.observed;
    const auto rows = patterns_as_rows(patterns, static_cast<std::size_t>(params.n_vars()));
    const Eigen::VectorXd log_p = row_log_likelihood(rows, params, rule);
    out.reserve(patterns.size());
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        out.push_back({patterns[i].pattern, patterns[i].observed,
                       n_total * std::exp(log_p[static_cast<Eigen::Index>(i)])});
    }
    return out;
}

double pearson_statistic(const std::vector<ExpectedCount>& counts, double n_total) {
    double stat = 0.0;
    double expected_total = 0.0;
    for (const auto& c : counts) {
        const double r = c.observed - c.expected;
        stat += r * r / c.expected;
        expected_total += c.expected;
    }
    return stat + (n_total - expected_total);
}

ChiSquareResult chi_square_test(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule) {
    const auto counts = expected_frequencies(pattern_table(data), params, rule);
    const double n_total = data.effective_n();
    ChiSquareResult res;
    res.statistic = pearson_statistic(counts, n_total);
    res.min_expected = std::numeric_limits<double>::infinity();
    for (const auto& c : counts) res.min_expected = std::min(res.min_expected, c.expected);

    const int m = params.n_vars();
    const int k = count_params(params.spec, m).k;
    res.dof = std::ldexp(1.0, m) - k - 1.0;
    res.applicable = m <= 25 && res.dof > 0.0 && res.min_expected >= 5.0;
    if (res.applicable) {
        res.p_value = boost::math::gamma_q(0.5 * res.dof, 0.5 * std::max(res.statistic, 0.0));
    }
    return res;
}

double truncated_sspr(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule,
                      double threshold) {
    if (threshold < 1.0) throw ArgumentError("SSPR threshold must be >= 1");
    std::vector<PatternCount> kept;
    for (const auto& p : pattern_table(data)) {
        if (p.observed >= threshold) kept.push_back(p);
    }
    if (kept.empty()) return 0.0;
    // Expected counts scale with the full sample size, not the kept subset.
    const double n_total = data.effective_n();
    const auto rows = patterns_as_rows(kept, data.n_vars());
    const Eigen::VectorXd log_p = row_log_likelihood(rows, params, rule);
    double total = 0.0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const double e = n_total * std::exp(log_p[static_cast<Eigen::Index>(i)]);
        const double r = kept[i].observed - e;
        total += r * r / e;
    }
    return total;
}

std::vector<SsprEntry> sspr_table(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule,
                                  const std::vector<double>& thresholds) {
    const auto table = pattern_table(data);
    std::vector<SsprEntry> out;
    for (double t : thresholds) {
        SsprEntry e;
        e.threshold = t;
        e.value = truncated_sspr(data, params, rule, t);
        for (const auto& p : table) e.n_patterns += p.observed >= t ? 1 : 0;
        out.push_back(e);
    }
    return out;
}

Eigen::MatrixXd lift_matrix(const MltaParameters& params, int g, const QuadratureRule& rule) {
    const int m = params.n_vars();
    if (g < 0 || g >= params.groups()) throw ArgumentError("group index out of range");
    if (params.dim() == 0) return Eigen::MatrixXd::Ones(m, m);
    if (rule.dim != params.dim()) throw ArgumentError("quadrature dimension does not match trait dimension");

    // Q x M response probabilities at the nodes.
    Eigen::MatrixXd prob = rule.points * params.slope(g).transpose();
    prob.rowwise() += params.intercept.col(g).transpose();
    prob = prob.unaryExpr([](double v) { return sigmoid(v); });

    const Eigen::VectorXd marginal = prob.transpose() * rule.weights;
    const Eigen::MatrixXd joint = prob.transpose() * rule.weights.asDiagonal() * prob;
    Eigen::MatrixXd lift = joint.array() / (marginal * marginal.transpose()).array();
    lift.diagonal().setOnes();
    return lift;
}

Eigen::MatrixXd standardize_slopes(const Eigen::MatrixXd& slopes) {
    Eigen::MatrixXd out = slopes;
    for (Eigen::Index m = 0; m < slopes.rows(); ++m) {
        out.row(m) /= std::sqrt(slopes.row(m).squaredNorm() + 1.0);
    }
    return out;
}

Eigen::MatrixXd median_probabilities(const Eigen::MatrixXd& intercepts) {
    return intercepts.unaryExpr([](double b) { return sigmoid(b); });
}

FitDiagnostics diagnose(const BinaryData& data, const MltaParameters& params, double loglik, int quadrature_q,
                        const std::vector<double>& sspr_thresholds) {
    FitDiagnostics out;
    const auto count = count_params(params.spec, params.n_vars());
    const auto ic = information_criteria(loglik, count.k, count.k_star, params.eta, data.effective_n());
    out.bic = ic.bic;
    out.bic_star = ic.bic_star;

    const QuadratureRule rule = params.dim() > 0 ? hermite_grid(quadrature_q, params.dim()) : QuadratureRule{};
    out.chi_sq = chi_square_test(data, params, rule);
    out.sspr = sspr_table(data, params, rule, sspr_thresholds);
    out.median_probs = median_probabilities(params.intercept);
    for (const auto& w : params.slopes) out.std_slopes.push_back(standardize_slopes(w));
    for (int g = 0; g < params.groups(); ++g) out.lift.push_back(lift_matrix(params, g, rule));
    return out;
}

}  // namespace mlta

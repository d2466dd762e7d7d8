#include "mlta/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mlta/errors.hpp"
#include "mlta/numeric.hpp"

namespace mlta {

namespace {

// Log-probability tables for one group: entry (q, m) = log P(x_m = 1 | y_q)
// and log P(x_m = 0 | y_q).
struct LogTables {
    Eigen::MatrixXd one;
    Eigen::MatrixXd zero;
};

LogTables log_tables(const MltaParameters& params, int g, const Eigen::MatrixXd& points) {
    const auto& w = params.slope(g);
    // Q x M linear predictors.
    Eigen::MatrixXd lin = points * w.transpose();
    lin.rowwise() += params.intercept.col(g).transpose();
    LogTables t{lin, lin};
    for (Eigen::Index i = 0; i < lin.size(); ++i) {
        t.one.data()[i] = log_sigmoid(lin.data()[i]);
        t.zero.data()[i] = log_sigmoid(-lin.data()[i]);
    }
    return t;
}

void check_rule(const MltaParameters& params, const QuadratureRule& rule) {
    if (params.dim() > 0 && rule.dim != params.dim()) {
        throw ArgumentError("quadrature dimension " + std::to_string(rule.dim) + " does not match trait dimension " +
                            std::to_string(params.dim()));
    }
}

}  // namespace

QuadratureRule hermite_rule(int q_points) {
    if (q_points < 1) throw ArgumentError("hermite_rule needs at least one point");
    const int n = q_points;
    // Roots of the physicists' Hermite polynomial H_n by Newton iteration on the
    // orthonormal recurrence, largest root first.
    std::vector<long double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    const long double pim4 = 0.7511255444649424828587030047762276930510L;  // pi^(-1/4)
    const int half = (n + 1) / 2;
    long double z = 0.0L;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(static_cast<long double>(2 * n + 1)) -
                1.85575L * std::pow(static_cast<long double>(2 * n + 1), -0.16667L);
        } else if (i == 1) {
            z -= 1.14L * std::pow(static_cast<long double>(n), 0.426L) / z;
        } else if (i == 2) {
            z = 1.86L * z - 0.86L * x[0];
        } else if (i == 3) {
            z = 1.91L * z - 0.91L * x[1];
        } else {
            z = 2.0L * z - x[static_cast<std::size_t>(i - 2)];
        }
        long double pp = 0.0L;
        for (int iter = 0; iter < 100; ++iter) {
            long double p1 = pim4;
            long double p2 = 0.0L;
            for (int j = 0; j < n; ++j) {
                const long double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0L / (j + 1)) * p2 - std::sqrt(static_cast<long double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0L * n) * p2;
            const long double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-17L) break;
        }
        if (n % 2 == 1 && i == half - 1) z = 0.0L;
        x[static_cast<std::size_t>(i)] = z;
        x[static_cast<std::size_t>(n - 1 - i)] = -z;
        w[static_cast<std::size_t>(i)] = 2.0L / (pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
    long double total = 0.0L;
    for (auto v : w) total += v;

    QuadratureRule rule;
    rule.dim = 1;
    rule.points.resize(n, 1);
    rule.weights.resize(n);
    // Ascending order; probabilists' scaling y = sqrt(2) x.
    for (int i = 0; i < n; ++i) {
        const auto src = static_cast<std::size_t>(n - 1 - i);
        rule.points(i, 0) = static_cast<double>(std::numbers::sqrt2_v<long double> * x[src]);
        rule.weights[i] = static_cast<double>(w[src] / total);
    }
    return rule;
}

QuadratureRule tensor_grid(const QuadratureRule& rule, int dim) {
    if (dim < 1) throw ArgumentError("tensor_grid needs dim >= 1");
    if (rule.dim != 1) throw ArgumentError("tensor_grid expects a one-dimensional rule");
    const Eigen::Index q = rule.size();
    Eigen::Index total = 1;
    for (int d = 0; d < dim; ++d) total *= q;

    QuadratureRule grid;
    grid.dim = dim;
    grid.points.resize(total, dim);
    grid.weights.resize(total);
    for (Eigen::Index idx = 0; idx < total; ++idx) {
        Eigen::Index rem = idx;
        double wt = 1.0;
        for (int d = dim - 1; d >= 0; --d) {
            const Eigen::Index k = rem % q;
            rem /= q;
            grid.points(idx, d) = rule.points(k, 0);
            wt *= rule.weights[k];
        }
        grid.weights[idx] = wt;
    }
    return grid;
}

QuadratureRule hermite_grid(int q_points, int dim) { return tensor_grid(hermite_rule(q_points), dim); }

Eigen::MatrixXd component_log_density(const BinaryData& data, const MltaParameters& params,
                                      const QuadratureRule& rule) {
    check_rule(params, rule);
    const auto n_rows = static_cast<Eigen::Index>(data.n_rows());
    const auto n_vars = static_cast<Eigen::Index>(data.n_vars());
    const int groups = params.groups();
    Eigen::MatrixXd out(n_rows, groups);

    if (params.dim() == 0) {
        for (int g = 0; g < groups; ++g) {
            for (Eigen::Index n = 0; n < n_rows; ++n) {
                double s = 0.0;
                for (Eigen::Index m = 0; m < n_vars; ++m) {
                    const double b = params.intercept(m, g);
                    s += log_sigmoid(data.at(static_cast<std::size_t>(n), static_cast<std::size_t>(m)) ? b : -b);
                }
                out(n, g) = s;
            }
        }
        return out;
    }

    const Eigen::VectorXd log_w = rule.weights.array().log();
    Eigen::VectorXd acc(rule.size());
    for (int g = 0; g < groups; ++g) {
        const LogTables t = log_tables(params, g, rule.points);
        for (Eigen::Index n = 0; n < n_rows; ++n) {
            acc = log_w;
            const auto row = data.row(static_cast<std::size_t>(n));
            for (Eigen::Index m = 0; m < n_vars; ++m) {
                acc += row[static_cast<std::size_t>(m)] ? t.one.col(m) : t.zero.col(m);
            }
            out(n, g) = log_sum_exp(std::span<const double>(acc.data(), static_cast<std::size_t>(acc.size())));
        }
    }
    return out;
}

Eigen::VectorXd row_log_likelihood(const BinaryData& data, const MltaParameters& params,
                                   const QuadratureRule& rule) {
    const Eigen::MatrixXd comp = component_log_density(data, params, rule);
    const Eigen::VectorXd log_eta = params.eta.array().log();
    Eigen::VectorXd out(comp.rows());
    Eigen::VectorXd tmp(comp.cols());
    for (Eigen::Index n = 0; n < comp.rows(); ++n) {
        tmp = comp.row(n).transpose() + log_eta;
        out[n] = log_sum_exp(std::span<const double>(tmp.data(), static_cast<std::size_t>(tmp.size())));
    }
    return out;
}

double gh_loglik(const BinaryData& data, const MltaParameters& params, const QuadratureRule& rule) {
    const Eigen::VectorXd rows = row_log_likelihood(data, params, rule);
    double total = 0.0;
    for (Eigen::Index n = 0; n < rows.size(); ++n) {
        const double w = data.weight(static_cast<std::size_t>(n));
        if (w > 0.0) total += w * rows[n];
    }
    return total;
}

double lca_form_loglik(const BinaryData& data, const MltaParameters& params) {
    if (params.dim() != 0) throw ArgumentError("lca_form_loglik requires D = 0");
    return gh_loglik(data, params, QuadratureRule{});
}

MonteCarloEstimate mc_loglik_detail(const BinaryData& data, const MltaParameters& params, int draws,
                                    std::uint64_t seed) {
    if (params.dim() < 1) throw ArgumentError("mc_loglik requires a trait dimension D >= 1");
    if (draws < 1) throw ArgumentError("mc_loglik requires at least one draw");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd y(draws, params.dim());
    for (Eigen::Index l = 0; l < y.rows(); ++l) {
        for (Eigen::Index d = 0; d < y.cols(); ++d) y(l, d) = normal(rng);
    }

    std::vector<LogTables> tables;
    for (int g = 0; g < params.groups(); ++g) tables.push_back(log_tables(params, g, y));
    const Eigen::VectorXd log_eta = params.eta.array().log();

    const double log_l = std::log(static_cast<double>(draws));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(draws);
    Eigen::VectorXd log_p(draws);
    Eigen::VectorXd per_group(params.groups());
    Eigen::MatrixXd comp(draws, params.groups());
    MonteCarloEstimate est;
    for (std::size_t n = 0; n < data.n_rows(); ++n) {
        const double wn = data.weight(n);
        if (wn <= 0.0) continue;
        const auto row = data.row(n);
        for (int g = 0; g < params.groups(); ++g) {
            auto col = comp.col(g);
            col.setConstant(log_eta[g]);
            for (std::size_t m = 0; m < data.n_vars(); ++m) {
                const auto mi = static_cast<Eigen::Index>(m);
                col += row[m] ? tables[static_cast<std::size_t>(g)].one.col(mi)
                              : tables[static_cast<std::size_t>(g)].zero.col(mi);
            }
        }
        for (Eigen::Index l = 0; l < draws; ++l) {
            per_group = comp.row(l).transpose();
            log_p[l] = log_sum_exp(std::span<const double>(per_group.data(), per_group.size()));
        }
        const double log_hat = log_sum_exp(std::span<const double>(log_p.data(), log_p.size())) - log_l;
        est.loglik += wn * log_hat;
        u.array() += wn * (log_p.array() - log_hat).exp();
    }
    if (draws > 1) {
        const double mean = u.mean();
        const double var = (u.array() - mean).square().sum() / (draws - 1);
        est.std_error = std::sqrt(var / draws);
    }
    return est;
}

double mc_loglik(const BinaryData& data, const MltaParameters& params, int draws, std::uint64_t seed) {
    return mc_loglik_detail(data, params, draws, seed).loglik;
}

double oracle_loglik(const BinaryData& data, const MltaParameters& params, double halfwidth, int grid_points) {
    const int dim = params.dim();
    if (dim < 1 || dim > 2) throw ArgumentError("oracle_loglik supports D = 1 or D = 2 only");
    if (grid_points < 101) throw ArgumentError("oracle_loglik needs at least 101 grid points");
    if (!(halfwidth > 0.0)) throw ArgumentError("oracle_loglik needs a positive half-width");

    const double step = 2.0 * halfwidth / (grid_points - 1);
    std::vector<double> nodes(static_cast<std::size_t>(grid_points));
    std::vector<double> trap(static_cast<std::size_t>(grid_points));
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (int i = 0; i < grid_points; ++i) {
        const double t = -halfwidth + i * step;
        nodes[static_cast<std::size_t>(i)] = t;
        const double end = (i == 0 || i == grid_points - 1) ? 0.5 : 1.0;
        trap[static_cast<std::size_t>(i)] = end * step * inv_sqrt_2pi * std::exp(-0.5 * t * t);
    }

    // Enumerate grid points as (y, weight) pairs.
    std::vector<std::pair<Eigen::VectorXd, double>> grid;
    if (dim == 1) {
        for (int i = 0; i < grid_points; ++i) {
            grid.emplace_back(Eigen::VectorXd::Constant(1, nodes[static_cast<std::size_t>(i)]),
                              trap[static_cast<std::size_t>(i)]);
        }
    } else {
        for (int i = 0; i < grid_points; ++i) {
            for (int j = 0; j < grid_points; ++j) {
                Eigen::VectorXd y(2);
                y << nodes[static_cast<std::size_t>(i)], nodes[static_cast<std::size_t>(j)];
                grid.emplace_back(y, trap[static_cast<std::size_t>(i)] * trap[static_cast<std::size_t>(j)]);
            }
        }
    }

    double total = 0.0;
    for (std::size_t n = 0; n < data.n_rows(); ++n) {
        if (data.weight(n) <= 0.0) continue;
        double p_row = 0.0;
        for (int g = 0; g < params.groups(); ++g) {
            const auto& w = params.slope(g);
            double integral = 0.0;
            for (const auto& [y, wt] : grid) {
                double log_prod = 0.0;
                for (std::size_t m = 0; m < data.n_vars(); ++m) {
                    const auto mi = static_cast<Eigen::Index>(m);
                    const double p = response_prob(params.intercept(mi, g), w.row(mi).transpose(), y);
                    log_prod += std::log(data.at(n, m) ? p : 1.0 - p);
                }
                integral += wt * std::exp(log_prod);
            }
            p_row += params.eta[g] * integral;
        }
        total += data.weight(n) * std::log(p_row);
    }
    return total;
}

}  // namespace mlta

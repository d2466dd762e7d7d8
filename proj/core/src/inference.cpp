#include "mlta/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "mlta/errors.hpp"
#include "mlta/diagnostics.hpp"
#include "mlta/numeric.hpp"

namespace mlta {

namespace {

unsigned worker_count(unsigned requested, std::size_t tasks) {
    unsigned n = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(tasks, 1)));
}

// Runs body(i) for i in [0, tasks). Each index is handled by exactly one
// worker, so writes to per-index slots need no locking.
template <class Body>
void parallel_for(std::size_t tasks, unsigned threads, Body&& body) {
    const unsigned workers = worker_count(threads, tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto run = [&] {
        for (std::size_t i = next++; i < tasks; i = next++) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

bool is_fit_failure(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const DegenerateGroup&) {
        return true;
    } catch (const NumericalError&) {
        return true;
    } catch (...) {
        return false;
    }
}

std::string message_of(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown error";
    }
}

// Group g of the reference matches group perm[g] of `other`, pairing the
// closest intercept columns.
std::vector<int> align_by_intercepts(const MltaParameters& ref, const MltaParameters& other) {
    const int groups = ref.groups();
    Eigen::MatrixXd score(groups, groups);
    for (int g = 0; g < groups; ++g) {
        for (int h = 0; h < groups; ++h) {
            score(g, h) = -(ref.intercept.col(g) - other.intercept.col(h)).squaredNorm();
        }
    }
    return max_assignment(score);
}

double invariant_distance(const MltaParameters& a, const MltaParameters& b) {
    const auto perm = align_by_intercepts(a, b);
    double dist = 0.0;
    for (int g = 0; g < a.groups(); ++g) {
        const int h = perm[static_cast<std::size_t>(g)];
        dist = std::max(dist, std::abs(a.eta[g] - b.eta[h]));
        dist = std::max(dist, (a.intercept.col(g) - b.intercept.col(h)).cwiseAbs().maxCoeff());
        if (a.dim() > 0 && (a.spec.mode == SlopeMode::Free || g == 0)) {
            // W W' is unchanged by rotations of the trait.
            const Eigen::MatrixXd ga = a.slope(g) * a.slope(g).transpose();
            const Eigen::MatrixXd gb = b.slope(h) * b.slope(h).transpose();
            dist = std::max(dist, (ga - gb).cwiseAbs().maxCoeff());
        }
    }
    return dist;
}

}  // namespace

std::vector<int> classify_map(const Eigen::MatrixXd& z) {
    std::vector<int> labels(static_cast<std::size_t>(z.rows()), 0);
    for (Eigen::Index n = 0; n < z.rows(); ++n) {
        int best = 0;
        for (Eigen::Index g = 1; g < z.cols(); ++g) {
            if (z(n, g) > z(n, best)) best = static_cast<int>(g);
        }
        labels[static_cast<std::size_t>(n)] = best;
    }
    return labels;
}

MultiStartResult multi_start_fit(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl) {
    ctrl.validate();
    spec.validate();
    const auto starts = static_cast<std::size_t>(ctrl.n_starts);
    std::vector<std::optional<MltaFit>> fits(starts);
    std::vector<std::exception_ptr> errors(starts);

    parallel_for(starts, ctrl.threads, [&](std::size_t s) {
        FitControl c = ctrl;
        c.seed = ctrl.seed + s;
        try {
            fits[s] = fit_mlta(data, spec, c);
        } catch (...) {
            errors[s] = std::current_exception();
        }
    });

    MultiStartResult out;
    out.start_logliks.resize(starts);
    out.start_params.resize(starts);
    int best = -1;
    for (std::size_t s = 0; s < starts; ++s) {
        if (errors[s]) {
            if (!is_fit_failure(errors[s])) std::rethrow_exception(errors[s]);
            out.failures.push_back("start " + std::to_string(s) + ": " + message_of(errors[s]));
            continue;
        }
        const double ll = fits[s]->report.loglik_gh;
        out.start_logliks[s] = ll;
        out.start_params[s] = fits[s]->params;
        if (std::isfinite(ll) && (best < 0 || ll > fits[static_cast<std::size_t>(best)]->report.loglik_gh)) {
            best = static_cast<int>(s);
        }
    }
    if (best < 0) {
        throw AllStartsFailed("all " + std::to_string(starts) + " starts failed for " + describe(spec));
    }
    out.best_start = best;
    out.best = std::move(*fits[static_cast<std::size_t>(best)]);
    if (!out.failures.empty()) {
        out.best.report.warnings.push_back(std::to_string(out.failures.size()) + " of " + std::to_string(starts) +
                                           " starts failed");
    }
    return out;
}

Simulation simulate(const MltaParameters& params, std::size_t n_rows, std::uint64_t seed) {
    params.validate();
    const int m = params.n_vars();
    const int d = params.dim();
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> group(params.eta.data(), params.eta.data() + params.eta.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Simulation sim;
    sim.z.resize(n_rows);
    sim.y.resize(static_cast<Eigen::Index>(n_rows), d);
    std::vector<std::uint8_t> cells(n_rows * static_cast<std::size_t>(m));
    Eigen::VectorXd y(d);
    for (std::size_t n = 0; n < n_rows; ++n) {
        const int g = group(rng);
        sim.z[n] = g;
        for (int j = 0; j < d; ++j) y[j] = normal(rng);
        sim.y.row(static_cast<Eigen::Index>(n)) = y.transpose();
        for (int k = 0; k < m; ++k) {
            double a = params.intercept(k, g);
            if (d > 0) a += params.slope(g).row(k).dot(y);
            cells[n * static_cast<std::size_t>(m) + static_cast<std::size_t>(k)] = unif(rng) < sigmoid(a) ? 1 : 0;
        }
    }
    sim.data = BinaryData(static_cast<std::size_t>(m), std::move(cells), std::vector<double>(n_rows, 1.0));
    return sim;
}

std::vector<ModelSpec> grid_specs(const std::vector<int>& groups, const std::vector<int>& dims,
                                  const std::vector<SlopeMode>& modes) {
    if (groups.empty() || dims.empty() || modes.empty()) throw ArgumentError("grid lists must be non-empty");
    std::vector<ModelSpec> specs;
    for (int g : groups) {
        for (int d : dims) {
            for (SlopeMode mode : modes) {
                ModelSpec s{g, d, mode};
                if (g == 1 || d == 0) s.mode = SlopeMode::Free;
                s.validate();
                if (std::find(specs.begin(), specs.end(), s) == specs.end()) specs.push_back(s);
            }
        }
    }
    return specs;
}

GridResult grid_search(const BinaryData& data, const std::vector<int>& groups, const std::vector<int>& dims,
                       const std::vector<SlopeMode>& modes, const FitControl& ctrl) {
    ctrl.validate();
    const auto specs = grid_specs(groups, dims, modes);
    GridResult res;
    res.rows.resize(specs.size());
    const int n_vars = static_cast<int>(data.n_vars());

    FitControl inner = ctrl;
    inner.threads = 1;
    parallel_for(specs.size(), ctrl.threads, [&](std::size_t i) {
        GridRow& row = res.rows[i];
        row.spec = specs[i];
        const auto count = count_params(row.spec, n_vars);
        row.k = count.k;
        row.k_star = count.k_star;
        try {
            auto ms = multi_start_fit(data, row.spec, inner);
            const auto& rep = ms.best.report;
            row.loglik = rep.loglik_gh;
            row.bic = rep.bic;
            row.bic_star = rep.bic_star;
            row.converged = rep.converged;
            row.warnings = rep.warnings;
            row.params = std::move(ms.best.params);
        } catch (const std::exception& e) {
            row.failed = true;
            row.loglik = row.bic = row.bic_star = std::numeric_limits<double>::quiet_NaN();
            row.warnings.push_back(e.what());
        }
    });

    const GridRow* by_bic = nullptr;
    const GridRow* by_star = nullptr;
    for (const auto& row : res.rows) {
        if (row.failed || !row.converged) continue;
        if (!by_bic || row.bic < by_bic->bic) by_bic = &row;
        if (!by_star || row.bic_star < by_star->bic_star) by_star = &row;
    }
    if (by_bic) res.best_by_bic = by_bic->spec;
    if (by_star) res.best_by_bic_star = by_star->spec;
    return res;
}

std::vector<int> max_assignment(const Eigen::MatrixXd& score) {
    const auto n = static_cast<int>(score.rows());
    if (score.cols() != n) throw ArgumentError("assignment needs a square matrix");
    if (n == 0) return {};
    // Hungarian algorithm on cost = max - score (1-based potentials).
    const double top = score.maxCoeff();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    auto cost = [&](int i, int j) { return top - score(i - 1, j - 1); };
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) continue;
                const double cur = cost(i0, j) - u[static_cast<std::size_t>(i0)] - v[sj];
                if (cur < minv[sj]) {
                    minv[sj] = cur;
                    way[sj] = j0;
                }
                if (minv[sj] < delta) {
                    delta = minv[sj];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) {
                    u[static_cast<std::size_t>(p[sj])] += delta;
                    v[sj] -= delta;
                } else {
                    minv[sj] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) perm[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return perm;
}

std::vector<int> align_groups(const Eigen::MatrixXd& z_ref, const Eigen::MatrixXd& z, const Eigen::VectorXd& weights) {
    if (z_ref.rows() != z.rows() || z_ref.cols() != z.cols() || weights.size() != z.rows()) {
        throw ArgumentError("responsibility matrices must have the same shape");
    }
    const Eigen::MatrixXd overlap = z_ref.transpose() * weights.asDiagonal() * z;
    return max_assignment(overlap);
}

JackknifeReport jackknife_se(const BinaryData& data, const MltaFit& fitted, const FitControl& ctrl,
                             const JackknifeOptions& options) {
    if (options.stride < 1 || options.max_iter < 1) throw ArgumentError("jackknife stride and max_iter must be >= 1");
    const MltaParameters& base = fitted.params;
    base.validate();
    if (static_cast<std::size_t>(fitted.state.z.rows()) != data.n_rows()) {
        throw ArgumentError("fitted state does not match the data");
    }
    const int groups = base.groups();
    const int m = base.n_vars();
    const bool free_slopes = base.spec.mode == SlopeMode::Free;

    std::vector<std::size_t> rows;
    for (std::size_t n = 0; n < data.n_rows(); n += static_cast<std::size_t>(options.stride)) rows.push_back(n);

    WarmStart warm;
    warm.params = base;
    warm.z = fitted.state.z;
    if (base.dim() > 0) warm.xi = fitted.state.xi;

    FitControl refit_ctrl = ctrl;
    refit_ctrl.max_iter = options.max_iter;
    refit_ctrl.threads = 1;

    const Eigen::Map<const Eigen::VectorXd> full_weights(data.weights().data(),
                                                         static_cast<Eigen::Index>(data.n_rows()));
    std::vector<std::optional<MltaParameters>> reps(rows.size());
    parallel_for(rows.size(), ctrl.threads, [&](std::size_t i) {
        std::vector<double> w = data.weights();
        w[rows[i]] -= 1.0;
        const BinaryData reduced = data.reweighted(std::move(w));
        try {
            MltaFit refit = fit_mlta_from(reduced, base.spec, refit_ctrl, warm);
            const auto perm = align_groups(fitted.state.z, refit.state.z, full_weights);
            MltaParameters aligned = refit.params;
            for (int g = 0; g < groups; ++g) {
                const int h = perm[static_cast<std::size_t>(g)];
                aligned.eta[g] = refit.params.eta[h];
                aligned.intercept.col(g) = refit.params.intercept.col(h);
                if (free_slopes && base.dim() > 0) {
                    aligned.slopes[static_cast<std::size_t>(g)] = refit.params.slopes[static_cast<std::size_t>(h)];
                }
            }
            reps[i] = std::move(aligned);
        } catch (const DegenerateGroup&) {
        } catch (const NumericalError&) {
        }
    });

    // A row of weight w stands for w identical delete-one replicates.
    double total = 0.0;
    int ok = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!reps[i]) continue;
        total += data.weight(rows[i]);
        ++ok;
    }
    JackknifeReport out;
    out.n_requested = static_cast<int>(rows.size());
    out.n_refits = ok;
    if (ok < out.n_requested) {
        out.warnings.push_back(std::to_string(out.n_requested - ok) + " delete-one refits degenerated and were excluded");
    }
    if (ok < 2) throw NumericalError("jackknife needs at least two successful refits");

    const double n_obs = data.effective_n();
    const double scale = (n_obs - 1.0) / n_obs * (n_obs / total);
    auto se_of = [&](auto extract) {
        using Mat = Eigen::MatrixXd;
        Mat mean;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!reps[i]) continue;
            const Mat v = extract(*reps[i]);
            if (mean.size() == 0) mean = Mat::Zero(v.rows(), v.cols());
            mean += data.weight(rows[i]) * v;
        }
        mean /= total;
        Mat ss = Mat::Zero(mean.rows(), mean.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!reps[i]) continue;
            ss += data.weight(rows[i]) * (extract(*reps[i]) - mean).array().square().matrix();
        }
        return Mat((scale * ss).array().sqrt());
    };

    out.se_eta = se_of([](const MltaParameters& p) { return Eigen::MatrixXd(p.eta); });
    out.se_b = se_of([](const MltaParameters& p) { return p.intercept; });
    out.se_median_prob = se_of([](const MltaParameters& p) { return median_probabilities(p.intercept); });
    for (std::size_t s = 0; s < base.slopes.size(); ++s) {
        out.se_w.push_back(se_of([s](const MltaParameters& p) { return p.slopes[s]; }));
    }

    int saturated = 0;
    for (int k = 0; k < m; ++k) {
        for (int g = 0; g < groups; ++g) {
            const double pi = sigmoid(base.intercept(k, g));
            if (std::min(pi, 1.0 - pi) < 1e-8) {
                out.se_b(k, g) = 0.0;
                out.se_median_prob(k, g) = 0.0;
                ++saturated;
            }
        }
    }
    if (saturated > 0) {
        out.warnings.push_back(std::to_string(saturated) +
                               " saturated intercepts (response probability at 0 or 1); their SEs are reported as 0");
    }
    return out;
}

IdentifiabilityReport identifiability_report(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl,
                                             const IdentifiabilityOptions& options) {
    spec.validate();
    IdentifiabilityReport rep;
    const int m = static_cast<int>(data.n_vars());
    rep.k = count_params(spec, m).k;
    rep.n_patterns = std::ldexp(1.0, m);
    rep.count_condition = static_cast<double>(rep.k) < rep.n_patterns;
    if (!rep.count_condition) {
        rep.flags.push_back("k = " + std::to_string(rep.k) + " is not below 2^M; the model cannot be identified");
    }

    std::optional<MultiStartResult> ms;
    try {
        ms = multi_start_fit(data, spec, ctrl);
    } catch (const AllStartsFailed& e) {
        rep.flags.push_back(e.what());
        return rep;
    }
    rep.start_logliks = ms->start_logliks;
    const double best = ms->best.report.loglik_gh;
    double worst = best;
    for (std::size_t s = 0; s < rep.start_logliks.size(); ++s) {
        const auto& ll = rep.start_logliks[s];
        if (!ll) continue;
        worst = std::min(worst, *ll);
        if (best - *ll > options.loglik_tol) continue;
        ++rep.starts_at_max;
        if (invariant_distance(ms->best.params, *ms->start_params[s]) > options.param_tol) rep.distinct_optima = true;
    }
    rep.loglik_spread = best - worst;
    if (rep.loglik_spread > options.loglik_tol) {
        rep.flags.push_back("log-likelihood differs across starts by " + std::to_string(rep.loglik_spread));
    }
    if (rep.distinct_optima) rep.flags.push_back("distinct parameter vectors attain the maximum log-likelihood");

    if (options.jackknife) {
        const auto jk = jackknife_se(data, ms->best, ctrl, options.jackknife_options);
        auto scan = [&](const Eigen::MatrixXd& se, const std::string& name) {
            for (Eigen::Index i = 0; i < se.rows(); ++i) {
                for (Eigen::Index j = 0; j < se.cols(); ++j) {
                    if (se(i, j) > options.se_flag) {
                        rep.high_se.push_back(name + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
                    }
                }
            }
        };
        scan(jk.se_eta, "eta");
        scan(jk.se_b, "b");
        for (std::size_t s = 0; s < jk.se_w.size(); ++s) scan(jk.se_w[s], "w" + std::to_string(s + 1));
        if (!rep.high_se.empty()) {
            rep.flags.push_back(std::to_string(rep.high_se.size()) + " parameters have jackknife SE above " +
                                std::to_string(options.se_flag));
        }
    }
    return rep;
}

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ArgumentError("labelings differ in length");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    // Pair counts from the contingency table.
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        cells[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    auto pairs = [](double c) { return c * (c - 1.0) / 2.0; };
    double same_both = 0.0, same_a = 0.0, same_b = 0.0;
    for (const auto& [key, c] : cells) same_both += pairs(c);
    for (const auto& [key, c] : rows) same_a += pairs(c);
    for (const auto& [key, c] : cols) same_b += pairs(c);
    const double total = pairs(static_cast<double>(n));
    return (total - same_a - same_b + 2.0 * same_both) / total;
}

}  // namespace mlta

// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mlta/data.hpp"
#include "mlta/diagnostics.hpp"
#include "mlta/errors.hpp"
#include "mlta/fit.hpp"
#include "mlta/inference.hpp"
#include "mlta/lca.hpp"
#include "mlta/numeric.hpp"
#include "mlta/quadrature.hpp"
#include "mlta/variational.hpp"

using namespace mlta;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_gap(double value, double target) { return std::abs(value - target) / std::abs(target); }

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Reference values for the voting records.
constexpr double kVoteLoglik = -4260.51;
constexpr double kVoteBic = 9699.65;
constexpr double kVoteBicStar = 9464.28;

struct Votes {
    BinaryData data;
    std::vector<bool> republican;
};

Votes load_votes() {
    std::ifstream in(std::string(MLTA_DATA_DIR) + "/house-votes-84.data");
    if (!in) throw ArgumentError("voting records not found");
    const auto table = load_categorical(in, false);
    Votes v{encode_categorical(drop_column(table, 0)), {}};
    for (const auto& row : table.rows) v.republican.push_back(row[0] == "republican");
    return v;
}

FitControl voting_control() {
    FitControl c;
    c.n_starts = 10;
    c.tol = 1e-2;
    c.final_quadrature_q = 5;
    c.seed = 0;
    return c;
}

void criteria_1_and_3(const Votes& votes) {
    const auto t0 = Clock::now();
    const auto ms = multi_start_fit(votes.data, {4, 2, SlopeMode::Common}, voting_control());
    const double secs = seconds_since(t0);
    const auto& r = ms.best.report;
    const bool ok1 = rel_gap(r.loglik_gh, kVoteLoglik) <= 0.01 && rel_gap(r.bic, kVoteBic) <= 0.01 &&
                     rel_gap(r.bic_star, kVoteBicStar) <= 0.01 && secs < 300.0;
    verdict(1, ok1,
            fmt("G=4 D=2 common: loglik %.2f (ref %.2f, %.2f%%), BIC %.2f (ref %.2f, %.2f%%), BIC* %.2f (ref %.2f, "
                "%.2f%%), %.1f s (limit 300 s)",
                r.loglik_gh, kVoteLoglik, 100 * rel_gap(r.loglik_gh, kVoteLoglik), r.bic, kVoteBic,
                100 * rel_gap(r.bic, kVoteBic), r.bic_star, kVoteBicStar, 100 * rel_gap(r.bic_star, kVoteBicStar),
                secs));

    // Best group by Republican purity among groups that cover >= 80% of Republicans.
    const int total_rep = static_cast<int>(std::count(votes.republican.begin(), votes.republican.end(), true));
    double best_purity = 0.0, best_recall = 0.0;
    int best_group = -1;
    for (int g = 0; g < 4; ++g) {
        int size = 0, rep = 0;
        for (std::size_t n = 0; n < r.classification.size(); ++n) {
            if (r.classification[n] != g) continue;
            ++size;
            rep += votes.republican[n] ? 1 : 0;
        }
        if (size == 0) continue;
        const double purity = static_cast<double>(rep) / size;
        const double recall = static_cast<double>(rep) / total_rep;
        if (recall >= 0.80 && purity > best_purity) {
            best_purity = purity;
            best_recall = recall;
            best_group = g;
        }
        if (best_group < 0 && recall > best_recall) best_recall = recall;
    }
    verdict(3, best_group >= 0 && best_purity >= 0.85,
            fmt("Republican group %d: purity %.3f (>= 0.85), recall %.3f of %d (>= 0.80)", best_group + 1, best_purity,
                best_recall, total_rep));
}

void criterion_2(const Votes& votes) {
    const auto t0 = Clock::now();
    const auto grid = grid_search(votes.data, {1, 2, 3, 4, 5}, {0, 1, 2, 3}, {SlopeMode::Free, SlopeMode::Common},
                                  voting_control());
    const double secs = seconds_since(t0);
    const ModelSpec target{4, 2, SlopeMode::Common};
    auto row_of = [&](const ModelSpec& s) -> const GridRow* {
        for (const auto& row : grid.rows) {
            if (row.spec == s) return &row;
        }
        return nullptr;
    };
    if (!grid.best_by_bic || !grid.best_by_bic_star) {
        verdict(2, false, "grid produced no converged cell");
        return;
    }
    const auto* bic_row = row_of(*grid.best_by_bic);
    const auto* star_row = row_of(*grid.best_by_bic_star);
    const auto* own = row_of(target);
    const bool exact = *grid.best_by_bic == target && *grid.best_by_bic_star == target;
    // Fallback: a different winner whose BIC lies within 0.5% of the reference winner's.
    const double gap_bic = rel_gap(bic_row->bic, kVoteBic);
    const double gap_star = rel_gap(star_row->bic_star, kVoteBicStar);
    const bool near = gap_bic <= 0.005 && gap_star <= 0.005;
    verdict(2, exact || near,
            fmt("best by BIC %s (%.2f, %.2f%% from ref %.2f), best by BIC* %s (%.2f, %.2f%% from ref %.2f); "
                "G=4 D=2 common here: BIC %.2f, BIC* %.2f; %zu cells in %.1f s",
                describe(*grid.best_by_bic).c_str(), bic_row->bic, 100 * gap_bic, kVoteBic,
                describe(*grid.best_by_bic_star).c_str(), star_row->bic_star, 100 * gap_star, kVoteBicStar,
                own ? own->bic : NAN, own ? own->bic_star : NAN, grid.rows.size(), secs));
}

void criterion_4() {
    Eigen::VectorXd one(1);
    one << 1.0;
    const auto big = information_criteria(-130135.91, 329, 16, one, 21574.0);
    Eigen::VectorXd eta(4);
    eta << 0.152, 0.025, 0.465, 0.358;
    const auto v = information_criteria(-4260.51, 194, 32, eta, 435.0);
    const double offset = v.bic_star - v.bic;
    verdict(4, std::abs(big.bic - 263554.99) <= 0.05 && std::abs(offset + 235.4) <= 0.5,
            fmt("BIC %.3f (ref 263554.99 +- 0.05), BIC* offset %.3f (ref -235.4 +- 0.5)", big.bic, offset));
}

MltaParameters toy_truth(std::uint64_t seed, int dim, SlopeMode mode) {
    return testing::random_params({2, dim, mode}, 6, seed, 1.5, 1.0);
}

void criterion_5() {
    std::vector<std::string> notes;
    bool ok = true;

    // (a) dominance and (b) monotonicity over 100 converged toy fits.
    int fits = 0, dominance_bad = 0, monotone_bad = 0;
    double worst_excess = -1e300, worst_drop = 0.0;
    for (std::uint64_t seed = 0; fits < 100 && seed < 1000; ++seed) {
        const int dim = 1 + static_cast<int>(seed % 2);
        const SlopeMode mode = (seed / 2) % 2 ? SlopeMode::Common : SlopeMode::Free;
        const auto data = simulate(toy_truth(seed, dim, mode), 150, seed + 1000).data;
        FitControl ctrl;
        ctrl.seed = seed;
        ctrl.tol = 1e-6;
        ctrl.max_iter = 20000;
        MltaFit fit;
        try {
            fit = fit_mlta(compress(data), {2, dim, mode}, ctrl);
        } catch (const DegenerateGroup&) {
            continue;
        }
        if (!fit.report.converged) continue;
        ++fits;
        const double gh = gh_loglik(data, fit.params, hermite_grid(dim == 1 ? 61 : 31, dim));
        worst_excess = std::max(worst_excess, fit.report.loglik_bound - gh);
        if (fit.report.loglik_bound > gh + 0.01) ++dominance_bad;
        const auto& t = fit.report.bound_trace;
        double drop = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i) drop = std::max(drop, t[i - 1] - t[i]);
        worst_drop = std::max(worst_drop, drop);
        if (drop > 1e-6) ++monotone_bad;
    }
    const bool a = fits == 100 && dominance_bad == 0;
    const bool b = fits == 100 && monotone_bad == 0;
    notes.push_back(fmt("(a) %d fits, max bound-GH %.2e (<= 0.01) %s", fits, worst_excess, a ? "ok" : "BAD"));
    notes.push_back(fmt("(b) max decrease %.2e (<= 1e-6) %s", worst_drop, b ? "ok" : "BAD"));
    ok = ok && a && b;

    // (c) D = 0 against the exact latent class EM, and the variational updates at D = 0.
    double c_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = testing::random_data(200, 5, seed + 50);
        FitControl ctrl;
        ctrl.seed = seed;
        ctrl.tol = 1e-8;
        const auto fit = fit_mlta(data, {2, 0, SlopeMode::Free}, ctrl);
        InitPolicy init;
        init.seed = seed;
        const auto lca = fit_lca(data, 2, init, ctrl);
        c_gap = std::max(c_gap, std::abs(fit.report.loglik_gh - lca.loglik));
    }
    {
        auto truth = MltaParameters::zeros({2, 0, SlopeMode::Free}, 5);
        truth.eta << 0.55, 0.45;
        truth.intercept.col(0) << 1.0, 0.8, -0.5, 1.2, 0.3;
        truth.intercept.col(1) << -1.0, -0.6, 0.7, -1.1, 0.2;
        const auto data = simulate(truth, 600, 8).data;
        FitControl ctrl;
        ctrl.tol = 1e-13;
        ctrl.max_iter = 20000;
        InitPolicy init;
        init.z = random_assignment(data.n_rows(), 2, 9);
        const auto lca = fit_lca(data, 2, init, ctrl);
        const Responses resp(data);
        auto params = MltaParameters::zeros({2, 0, SlopeMode::Free}, 5);
        auto state = VariationalState::init(600, 5, 2, 0, 1.0);
        state.z = *init.z;
        std::vector<double> trace;
        for (int iter = 0; iter < 20000; ++iter) {
            if (iter > 0) state.z = estep_responsibilities(params.eta, state.bound);
            params.eta = state.z.colwise().sum().transpose() / 600.0;
            update_xi(params, state);
            update_posteriors(resp, params, state);
            mstep_free(resp, state, params);
            update_xi(params, state);
            update_posteriors(resp, params, state);
            update_bounds(resp, params, state);
            trace.push_back(variational_loglik(resp, params.eta, state.bound));
            if (aitken_stop(trace, 1e-13)) break;
        }
        c_gap = std::max(c_gap, std::abs(trace.back() - lca.loglik));
    }
    const bool c = c_gap <= 1e-6;
    notes.push_back(fmt("(c) max |D=0 - LCA| %.2e (<= 1e-6) %s", c_gap, c ? "ok" : "BAD"));
    ok = ok && c;

    // (d) Gauss-Hermite against the trapezoid oracle.
    double d_gap = 0.0;
    {
        const auto data = testing::random_data(60, 6, 77);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto p = testing::random_params({2, 1, SlopeMode::Free}, 6, seed + 200);
            d_gap = std::max(d_gap, rel_gap(gh_loglik(data, p, hermite_grid(21, 1)), oracle_loglik(data, p, 9.0, 801)));
        }
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto p = testing::random_params({2, 2, SlopeMode::Free}, 6, seed + 300);
            d_gap = std::max(d_gap, rel_gap(gh_loglik(data, p, hermite_grid(21, 2)), oracle_loglik(data, p, 9.0, 241)));
        }
    }
    const bool d = d_gap <= 1e-4;
    notes.push_back(fmt("(d) max relative GH-oracle %.2e (<= 1e-4) %s", d_gap, d ? "ok" : "BAD"));
    ok = ok && d;

    // (e) xi fixed point at convergence: xi^2 = E[(b + w'y)^2].
    double e_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const int dim = 1 + static_cast<int>(seed % 2);
        const auto data = simulate(toy_truth(seed + 500, dim, SlopeMode::Free), 200, seed).data;
        FitControl ctrl;
        ctrl.seed = seed;
        ctrl.tol = 1e-10;
        ctrl.max_iter = 20000;
        MltaFit fit;
        try {
            fit = fit_mlta(data, {2, dim, SlopeMode::Free}, ctrl);
        } catch (const DegenerateGroup&) {
            continue;
        }
        auto state = fit.state;
        update_xi(fit.params, state);
        for (std::size_t g = 0; g < state.xi.size(); ++g) {
            e_gap = std::max(e_gap, (state.xi[g].array().square() - fit.state.xi[g].array().square()).abs().maxCoeff());
        }
    }
    const bool e = e_gap <= 1e-8;
    notes.push_back(fmt("(e) max |xi^2 - E[A^2]| %.2e (<= 1e-8) %s", e_gap, e ? "ok" : "BAD"));
    ok = ok && e;

    // (f) rotating the slopes leaves the likelihood and the bound unchanged.
    double f_gap = 0.0, f_bound_gap = 0.0;
    {
        const auto data = testing::random_data(40, 6, 5);
        const Responses resp(data);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto p = testing::random_params({2, 2, SlopeMode::Free}, 6, seed + 600);
            const double angle = 0.3 + 0.5 * static_cast<double>(seed);
            Eigen::MatrixXd rot(2, 2);
            rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
            auto r = p;
            for (auto& w : r.slopes) w = w * rot.transpose();
            // The product rule is only approximately invariant; a fine one resolves 1e-8.
            const auto rule = hermite_grid(81, 2);
            f_gap = std::max(f_gap, std::abs(gh_loglik(data, p, rule) - gh_loglik(data, r, rule)));

            auto s = VariationalState::init(40, 6, 2, 2, 1.3);
            update_posteriors(resp, p, s);
            update_xi(p, s);
            update_posteriors(resp, p, s);
            update_bounds(resp, p, s);
            auto sr = s;
            update_posteriors(resp, r, sr);
            update_bounds(resp, r, sr);
            f_bound_gap = std::max(f_bound_gap, (s.bound - sr.bound).cwiseAbs().maxCoeff());
        }
    }
    const bool f = f_gap <= 1e-8 && f_bound_gap <= 1e-8;
    notes.push_back(fmt("(f) max rotation change: likelihood %.2e, bound %.2e (<= 1e-8) %s", f_gap, f_bound_gap,
                        f ? "ok" : "BAD"));
    ok = ok && f;

    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    verdict(5, ok, detail);
}

void criterion_6() {
    const auto t0 = Clock::now();
    MltaParameters truth = MltaParameters::zeros({2, 1, SlopeMode::Common}, 10);
    truth.eta << 0.6, 0.4;
    truth.intercept.col(0) << 2.0, 2.0, 2.0, 2.0, 2.0, -1.5, -1.5, -1.5, -1.5, -1.5;
    truth.intercept.col(1) << -2.0, -2.0, -2.0, -2.0, -2.0, 1.5, 1.5, 1.5, 1.5, 1.5;
    truth.slopes[0].setConstant(1.0);
    const std::size_t n = 5000;

    double worst_rand = 1.0, worst_eta = 0.0;
    int common_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sim = simulate(truth, n, 100 + seed);
        const auto packed = compress(sim.data);
        FitControl ctrl;
        ctrl.n_starts = 3;
        ctrl.seed = seed;
        const auto common = multi_start_fit(packed, {2, 1, SlopeMode::Common}, ctrl).best;
        const auto free = multi_start_fit(packed, {2, 1, SlopeMode::Free}, ctrl).best;
        if (common.report.bic < free.report.bic) ++common_wins;

        const auto rule = hermite_grid(ctrl.final_quadrature_q, 1);
        const auto z = estep_responsibilities(common.params.eta, component_log_density(sim.data, common.params, rule));
        const auto labels = classify_map(z);
        worst_rand = std::min(worst_rand, rand_index(labels, sim.z));
        // Groups are sorted by eta, so group 0 estimates the 0.6 component.
        worst_eta = std::max(worst_eta, (common.params.eta - truth.eta).cwiseAbs().maxCoeff());
    }
    const double secs = seconds_since(t0);
    verdict(6, worst_rand >= 0.9 && worst_eta <= 0.05 && common_wins >= 8 && secs < 120.0,
            fmt("10 seeds, N=5000: min Rand %.4f (>= 0.9), max |eta-hat - eta| %.4f (<= 0.05), common BIC below "
                "free in %d/10 (>= 8), %.1f s (limit 120 s)",
                worst_rand, worst_eta, common_wins, secs));
}

void criterion_7() {
    double chi_gap = 0.0;
    bool monotone = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = compress(testing::random_data(400 + 50 * seed, 4, seed + 900));
        const double n = data.effective_n();
        const auto p = testing::random_params({2, 1, SlopeMode::Free}, 4, seed + 950);
        const auto rule = hermite_grid(5, 1);
        const double stat = chi_square_test(data, p, rule).statistic;

        // Enumerate all sixteen patterns, each evaluated on its own.
        const auto table = pattern_table(data);
        double oracle = 0.0;
        for (int code = 0; code < 16; ++code) {
            std::vector<int> row(4);
            std::string pat;
            for (int m = 0; m < 4; ++m) {
                row[static_cast<std::size_t>(m)] = (code >> (3 - m)) & 1;
                pat.push_back(row[static_cast<std::size_t>(m)] ? '1' : '0');
            }
            double observed = 0.0;
            for (const auto& t : table) observed += t.pattern == pat ? t.observed : 0.0;
            const double e = n * std::exp(gh_loglik(BinaryData::from_rows({row}), p, rule));
            oracle += (observed - e) * (observed - e) / e;
        }
        chi_gap = std::max(chi_gap, std::abs(stat - oracle));

        double previous = std::numeric_limits<double>::infinity();
        for (double t : {1.0, 10.0, 25.0, 100.0}) {
            const double v = truncated_sspr(data, p, rule, t);
            monotone = monotone && v <= previous;
            previous = v;
        }
    }
    verdict(7, chi_gap <= 1e-8 && monotone,
            fmt("10 M=4 toys: max |chi2 - enumeration| %.2e (<= 1e-8), SSPR non-increasing over {1,10,25,100}: %s",
                chi_gap, monotone ? "yes" : "no"));
}

// Trapezoid lift for two items with a one-dimensional trait.
double oracle_lift(double bm, double wm, double bk, double wk) {
    const int points = 20001;
    const double h = 20.0 / (points - 1);
    double pm = 0, pk = 0, joint = 0;
    for (int i = 0; i < points; ++i) {
        const double y = -10.0 + i * h;
        const double phi = std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi) * h;
        const double sm = sigmoid(bm + wm * y), sk = sigmoid(bk + wk * y);
        pm += sm * phi;
        pk += sk * phi;
        joint += sm * sk * phi;
    }
    return joint / (pm * pk);
}

void criterion_8() {
    double flat_gap = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto p = testing::random_params({2, 2, SlopeMode::Free}, 5, seed + 40);
        for (auto& w : p.slopes) w.setZero();
        for (int g = 0; g < 2; ++g) {
            flat_gap = std::max(flat_gap, (lift_matrix(p, g, hermite_grid(5, 2)).array() - 1.0).abs().maxCoeff());
        }
    }
    auto q = MltaParameters::zeros({1, 1, SlopeMode::Free}, 2);
    q.slopes[0] << 1.0, 1.0;
    const double lift = lift_matrix(q, 0, hermite_grid(41, 1))(0, 1);
    const double oracle = oracle_lift(0, 1, 0, 1);
    verdict(8, flat_gap <= 1e-10 && std::abs(lift - 1.165) <= 0.01 && std::abs(oracle - 1.165) <= 0.01,
            fmt("w=0: max |lift - 1| %.2e (<= 1e-10); b=0, w=1: lift %.4f, fine-grid oracle %.4f (1.165 +- 0.01)",
                flat_gap, lift, oracle));
}

void guarded(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        verdict(id, false, std::string("threw: ") + e.what());
    }
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    Votes votes;
    try {
        votes = load_votes();
    } catch (const std::exception& e) {
        std::printf("cannot load voting records: %s\n", e.what());
        return 1;
    }
    guarded(1, [&] { criteria_1_and_3(votes); });
    guarded(2, [&] { criterion_2(votes); });
    guarded(4, criterion_4);
    guarded(5, criterion_5);
    guarded(6, criterion_6);
    guarded(7, criterion_7);
    guarded(8, criterion_8);
    std::printf("%d criterion(s) failed, %.1f s total\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}

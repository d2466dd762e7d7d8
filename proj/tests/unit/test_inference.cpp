#include <cmath>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mlta/diagnostics.hpp"
#include "mlta/errors.hpp"
#include "mlta/inference.hpp"
#include "mlta/numeric.hpp"

using namespace mlta;
using doctest::Approx;

namespace {

// Rows are either all zeros or all ones.
BinaryData two_blocks(int zeros, int ones, int n_vars) {
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < zeros; ++i) rows.emplace_back(static_cast<std::size_t>(n_vars), 0);
    for (int i = 0; i < ones; ++i) rows.emplace_back(static_cast<std::size_t>(n_vars), 1);
    return BinaryData::from_rows(rows);
}

MltaParameters separated_truth() {
    MltaParameters t = MltaParameters::zeros({2, 1, SlopeMode::Free}, 8);
    t.eta << 0.6, 0.4;
    t.intercept.col(0).setConstant(2.5);
    t.intercept.col(1).setConstant(-2.5);
    t.slopes[0].setConstant(1.0);
    t.slopes[1].setConstant(0.8);
    return t;
}

}  // namespace

TEST_CASE("MAP classification") {
    Eigen::MatrixXd z(3, 2);
    z << 0.2, 0.8, 0.5, 0.5, 0.9, 0.1;
    CHECK(classify_map(z) == std::vector<int>{1, 0, 0});

    Eigen::MatrixXd swapped = z.rowwise().reverse();
    CHECK(classify_map(swapped) == std::vector<int>{0, 0, 1});

    Eigen::MatrixXd scaled = (3.0 * z.array() + 0.0).matrix();
    scaled = scaled.array().pow(2.0);
    CHECK(classify_map(scaled) == classify_map(z));
}

TEST_CASE("multi-start with one start is a direct fit") {
    const auto data = simulate(separated_truth(), 200, 3).data;
    FitControl ctrl;
    ctrl.n_starts = 1;
    ctrl.seed = 5;
    const auto ms = multi_start_fit(data, {2, 1, SlopeMode::Free}, ctrl);
    const auto direct = fit_mlta(data, {2, 1, SlopeMode::Free}, ctrl);
    CHECK(ms.best.report.loglik_gh == direct.report.loglik_gh);
    CHECK(ms.start_logliks.size() == 1);
}

TEST_CASE("multi-start is deterministic and independent of thread count") {
    const auto data = simulate(separated_truth(), 200, 4).data;
    FitControl ctrl;
    ctrl.n_starts = 4;
    ctrl.seed = 11;
    ctrl.threads = 1;
    const auto a = multi_start_fit(data, {2, 1, SlopeMode::Common}, ctrl);
    ctrl.threads = 3;
    const auto b = multi_start_fit(data, {2, 1, SlopeMode::Common}, ctrl);
    CHECK(a.best.report.loglik_gh == b.best.report.loglik_gh);
    CHECK(a.best_start == b.best_start);
    for (std::size_t s = 0; s < a.start_logliks.size(); ++s) CHECK(a.start_logliks[s] == b.start_logliks[s]);
    CHECK(a.best.report.seed == 11 + static_cast<std::uint64_t>(a.best_start));
}

TEST_CASE("separable blocks: starts agree") {
    const auto data = two_blocks(60, 40, 6);
    FitControl ctrl;
    ctrl.n_starts = 10;
    ctrl.tol = 1e-8;
    const auto ms = multi_start_fit(data, {2, 0, SlopeMode::Free}, ctrl);
    int agree = 0;
    for (const auto& ll : ms.start_logliks) agree += ll && std::abs(*ll - ms.best.report.loglik_gh) < 1e-4 ? 1 : 0;
    CHECK(agree >= 9);
}

TEST_CASE("all starts failing") {
    const auto data = BinaryData::from_rows({{0, 1}, {1, 0}});
    FitControl ctrl;
    ctrl.n_starts = 3;
    CHECK_THROWS_AS(multi_start_fit(data, {4, 1, SlopeMode::Free}, ctrl), AllStartsFailed);
}

TEST_CASE("simulation") {
    auto p = testing::random_params({3, 1, SlopeMode::Free}, 5, 2);
    for (auto& w : p.slopes) w.setZero();
    const std::size_t n = 10000;
    const auto sim = simulate(p, n, 8);
    const Eigen::VectorXd avg = median_probabilities(p.intercept) * p.eta;
    for (Eigen::Index m = 0; m < 5; ++m) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += sim.data.at(i, static_cast<std::size_t>(m));
        mean /= static_cast<double>(n);
        CHECK(std::abs(mean - avg[m]) <= 3.0 * std::sqrt(avg[m] * (1.0 - avg[m]) / static_cast<double>(n)));
    }
    const auto again = simulate(p, n, 8);
    CHECK(pattern_table(again.data) == pattern_table(sim.data));
    CHECK(again.z == sim.z);

    auto single = MltaParameters::zeros({1, 2, SlopeMode::Free}, 3);
    const auto s1 = simulate(single, 50, 1);
    CHECK(std::all_of(s1.z.begin(), s1.z.end(), [](int g) { return g == 0; }));
    CHECK(s1.y.rows() == 50);
    CHECK(s1.y.cols() == 2);
}

TEST_CASE("assignment and alignment") {
    Eigen::MatrixXd score(3, 3);
    score << 1, 5, 2, 4, 1, 1, 2, 2, 3;
    CHECK(max_assignment(score) == std::vector<int>{1, 0, 2});

    Eigen::MatrixXd z(4, 2);
    z << 1, 0, 1, 0, 0, 1, 0, 1;
    const Eigen::MatrixXd swapped = z.rowwise().reverse();
    CHECK(align_groups(z, swapped, Eigen::VectorXd::Ones(4)) == std::vector<int>{1, 0});

    // Exhaustive check on random 5x5 scores.
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXd s(5, 5);
        for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = u(rng);
        std::vector<int> perm{0, 1, 2, 3, 4};
        double best = -1.0;
        do {
            double t = 0.0;
            for (int i = 0; i < 5; ++i) t += s(i, perm[static_cast<std::size_t>(i)]);
            best = std::max(best, t);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const auto got = max_assignment(s);
        double t = 0.0;
        for (int i = 0; i < 5; ++i) t += s(i, got[static_cast<std::size_t>(i)]);
        CHECK(t == Approx(best).epsilon(1e-14));
    }
}

TEST_CASE("Rand index") {
    CHECK(rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
    // Pairs: (12 same/same) (13 diff/same) (14 diff/diff) (23 diff/diff) (24 diff/same) (34 same/diff) -> 3 of 6 agree.
    CHECK(rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) == Approx(2.0 / 6.0));
}

TEST_CASE("grid specs fold duplicate common cells") {
    const auto specs = grid_specs({1, 2}, {0, 1}, {SlopeMode::Free, SlopeMode::Common});
    CHECK(specs.size() == 5);
    CHECK(specs[0] == ModelSpec{1, 0, SlopeMode::Free});
    CHECK(specs[1] == ModelSpec{1, 1, SlopeMode::Free});
    CHECK(specs[4] == ModelSpec{2, 1, SlopeMode::Common});
}

TEST_CASE("grid search") {
    const auto data = simulate(separated_truth(), 300, 6).data;
    FitControl ctrl;
    ctrl.n_starts = 2;
    const auto single = grid_search(data, {1}, {0}, {SlopeMode::Free}, ctrl);
    REQUIRE(single.rows.size() == 1);
    CHECK(single.rows[0].spec.is_lca());
    CHECK(single.best_by_bic == ModelSpec{1, 0, SlopeMode::Free});

    const auto grid = grid_search(data, {1, 2, 9}, {0, 1}, {SlopeMode::Free, SlopeMode::Common}, ctrl);
    CHECK(grid.rows.size() == 2 + 3 + 3);
    for (const auto& r : grid.rows) {
        if (r.failed) continue;
        CHECK(std::abs(r.bic - (-2.0 * r.loglik + r.k * std::log(300.0))) < 0.01);
        REQUIRE(r.params);
        CHECK(std::abs(r.bic_star - (r.bic + r.k_star * r.params->eta.array().log().sum())) < 0.01);
    }
    REQUIRE(grid.best_by_bic);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : grid.rows) {
        if (!r.failed && r.converged) best = std::min(best, r.bic);
    }
    for (const auto& r : grid.rows) {
        if (r.spec == *grid.best_by_bic) CHECK(r.bic == best);
    }
}

TEST_CASE("simulate and recover") {
    const auto truth = separated_truth();
    const auto sim = simulate(truth, 2000, 12);
    FitControl ctrl;
    ctrl.n_starts = 3;
    const auto ms = multi_start_fit(sim.data, {2, 1, SlopeMode::Free}, ctrl);
    CHECK(rand_index(ms.best.report.classification, sim.z) >= 0.9);
    CHECK(std::abs(ms.best.params.eta[0] - 0.6) <= 0.05);
}

TEST_CASE("jackknife of a single class is the classical standard error") {
    const auto data = testing::random_data(60, 3, 4);
    FitControl ctrl;
    ctrl.tol = 1e-10;
    const auto fit = fit_mlta(data, {1, 0, SlopeMode::Free}, ctrl);
    const auto jk = jackknife_se(data, fit, ctrl);
    CHECK(jk.n_refits == 60);
    for (Eigen::Index m = 0; m < 3; ++m) {
        double mean = 0.0;
        for (std::size_t n = 0; n < 60; ++n) mean += data.at(n, static_cast<std::size_t>(m));
        mean /= 60.0;
        double ss = 0.0;
        for (std::size_t n = 0; n < 60; ++n) ss += std::pow(data.at(n, static_cast<std::size_t>(m)) - mean, 2);
        const double s = std::sqrt(ss / 59.0);
        CHECK(std::abs(jk.se_median_prob(m, 0) - s / std::sqrt(60.0)) < 1e-10);
    }
    CHECK(jk.se_eta[0] == 0.0);
}

TEST_CASE("jackknife on weighted rows equals the expanded data") {
    const auto expanded = testing::random_data(50, 3, 9);
    const auto compressed = compress(expanded);
    FitControl ctrl;
    ctrl.tol = 1e-10;
    const auto a = jackknife_se(expanded, fit_mlta(expanded, {1, 0, SlopeMode::Free}, ctrl), ctrl);
    const auto b = jackknife_se(compressed, fit_mlta(compressed, {1, 0, SlopeMode::Free}, ctrl), ctrl);
    CHECK((a.se_median_prob - b.se_median_prob).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant column saturates") {
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 20; ++i) rows.push_back({1, i % 2, (i / 3) % 2});
    const auto data = BinaryData::from_rows(rows);
    FitControl ctrl;
    const auto fit = fit_mlta(data, {1, 0, SlopeMode::Free}, ctrl);
    const auto jk = jackknife_se(data, fit, ctrl);
    CHECK(jk.se_b(0, 0) == 0.0);
    REQUIRE_FALSE(jk.warnings.empty());
    CHECK(jk.warnings.back().find("saturated") != std::string::npos);
}

TEST_CASE("jackknife with a latent trait") {
    const auto data = simulate(separated_truth(), 150, 2).data;
    FitControl ctrl;
    ctrl.n_starts = 2;
    const auto ms = multi_start_fit(data, {2, 1, SlopeMode::Free}, ctrl);
    JackknifeOptions opt;
    opt.stride = 3;
    const auto jk = jackknife_se(data, ms.best, ctrl, opt);
    CHECK(jk.n_requested == 50);
    CHECK(jk.se_eta.size() == 2);
    CHECK((jk.se_eta.array() >= 0.0).all());
    CHECK((jk.se_b.array() >= 0.0).all());
    CHECK(jk.se_w.size() == 2);
    // Binomial standard error of a 0.6 / 0.4 split as a sanity scale.
    CHECK(jk.se_eta[0] < 0.15);
}

TEST_CASE("identifiability report") {
    const auto data = testing::random_data(30, 3, 1);
    FitControl ctrl;
    ctrl.n_starts = 2;
    IdentifiabilityOptions opt;
    opt.jackknife = false;
    const auto over = identifiability_report(data, {4, 1, SlopeMode::Free}, ctrl, opt);
    CHECK(over.k == 27);
    CHECK_FALSE(over.count_condition);
    CHECK_FALSE(over.flags.empty());

    const auto one = identifiability_report(data, {1, 0, SlopeMode::Free}, ctrl, opt);
    CHECK(one.count_condition);
    CHECK(one.k == 3);

    const auto sep = two_blocks(40, 30, 5);
    FitControl tight;
    tight.n_starts = 5;
    tight.tol = 1e-8;
    const auto r = identifiability_report(sep, {2, 0, SlopeMode::Free}, tight);
    CHECK(r.loglik_spread < 1e-4);
    CHECK_FALSE(r.distinct_optima);
    CHECK(r.flags.empty());
}

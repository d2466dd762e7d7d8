#include "mlta/fit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mlta/diagnostics.hpp"
#include "mlta/errors.hpp"
#include "mlta/inference.hpp"
#include "mlta/lca.hpp"
#include "mlta/numeric.hpp"
#include "mlta/quadrature.hpp"

namespace mlta {

namespace {

void check_groups(const Responses& resp, const Eigen::MatrixXd& z, Eigen::VectorXd& eta) {
    eta = z.transpose() * resp.weights;
    for (Eigen::Index g = 0; g < eta.size(); ++g) {
        if (eta[g] < 1.0) throw DegenerateGroup(static_cast<int>(g), eta[g]);
    }
    eta /= resp.weights.sum();
}

MltaFit fit_latent_class(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl,
                         const InitPolicy& init) {
    LcaFit lca = fit_lca(data, spec.groups, init, ctrl);
    MltaFit fit;
    fit.params = to_mlta(lca.params);
    fit.state = VariationalState::init(static_cast<Eigen::Index>(data.n_rows()),
                                       static_cast<Eigen::Index>(data.n_vars()), spec.groups, 0, 0.0);
    fit.state.z = lca.z;
    for (int g = 0; g < spec.groups; ++g) {
        auto& xi = fit.state.xi[static_cast<std::size_t>(g)];
        xi = fit.params.intercept.col(g).transpose().cwiseAbs().replicate(xi.rows(), 1);
    }
    fit.state.bound = component_log_density(data, fit.params, QuadratureRule{});

    auto& rep = fit.report;
    rep.bound_trace = lca.trace;
    rep.loglik_bound = lca.loglik;
    rep.loglik_gh = lca.loglik;
    rep.n_iter = lca.n_iter;
    rep.converged = lca.converged;
    if (lca.saturated) rep.warnings.push_back("response probabilities reached the clamp [1e-10, 1-1e-10]");
    return fit;
}

void finish(const BinaryData& data, const FitControl& ctrl, MltaFit& fit) {
    const auto order = sort_groups_by_eta(fit.params);
    fit.state.permute_groups(order);
    auto& rep = fit.report;
    rep.spec = fit.params.spec;
    if (fit.params.dim() > 0) {
        rep.quadrature_q = ctrl.final_quadrature_q;
        rep.loglik_gh = gh_loglik(data, fit.params, hermite_grid(ctrl.final_quadrature_q, fit.params.dim()));
    }
    rep.classification = classify_map(fit.state.z);
    finalize_criteria(rep, fit.params, static_cast<int>(data.n_vars()));
}

}  // namespace

void finalize_criteria(FitReport& report, const MltaParameters& params, int n_vars) {
    const auto count = count_params(params.spec, n_vars);
    report.k = count.k;
    report.k_star = count.k_star;
    const auto ic = information_criteria(report.loglik_gh, count.k, count.k_star, params.eta, report.n_obs);
    report.bic = ic.bic;
    report.bic_star = ic.bic_star;
}

WarmStart random_start(const BinaryData& data, const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    WarmStart start;
    start.z = random_assignment(data.n_rows(), spec.groups, seed);
    start.params = MltaParameters::zeros(spec, static_cast<int>(data.n_vars()));
    // Independent stream for parameters so z matches the latent class start.
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < start.params.intercept.size(); ++i) start.params.intercept.data()[i] = normal(rng);
    for (auto& w : start.params.slopes) {
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    }
    return start;
}

MltaFit fit_mlta(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl) {
    spec.validate();
    MltaFit fit;
    if (spec.is_lca()) {
        InitPolicy init;
        init.seed = ctrl.seed;
        fit = fit_latent_class(data, spec, ctrl, init);
        fit.report.seed = ctrl.seed;
        fit.report.n_obs = data.effective_n();
        finish(data, ctrl, fit);
        return fit;
    }
    fit = fit_mlta_from(data, spec, ctrl, random_start(data, spec, ctrl.seed));
    fit.report.seed = ctrl.seed;
    return fit;
}

MltaFit fit_mlta_from(const BinaryData& data, const ModelSpec& spec, const FitControl& ctrl, const WarmStart& start) {
    spec.validate();
    ctrl.validate();
    if (data.empty() || data.n_vars() == 0) throw ArgumentError("fit needs non-empty data");
    const auto n_rows = static_cast<Eigen::Index>(data.n_rows());
    const auto n_vars = static_cast<Eigen::Index>(data.n_vars());
    if (start.z.rows() != n_rows || start.z.cols() != spec.groups) {
        throw ArgumentError("warm start responsibilities have the wrong shape");
    }

    if (spec.is_lca()) {
        InitPolicy init;
        init.seed = ctrl.seed;
        if (start.params.intercept.size() > 0 && start.params.spec == spec) {
            LcaParameters lp;
            lp.eta = start.params.eta;
            lp.pi = start.params.intercept.unaryExpr([](double b) { return 1.0 / (1.0 + std::exp(-b)); });
            init.params = lp;
        } else {
            init.z = start.z;
        }
        MltaFit fit = fit_latent_class(data, spec, ctrl, init);
        fit.report.seed = ctrl.seed;
        fit.report.n_obs = data.effective_n();
        finish(data, ctrl, fit);
        return fit;
    }

    MltaFit fit;
    fit.params = start.params;
    fit.params.spec = spec;
    fit.params.validate();
    if (fit.params.n_vars() != n_vars) throw ArgumentError("warm start parameters have the wrong number of variables");

    const Responses resp(data);
    auto& state = fit.state;
    auto& rep = fit.report;
    state = VariationalState::init(n_rows, n_vars, spec.groups, spec.dim, kInitialXi);
    if (!start.xi.empty()) {
        if (start.xi.size() != static_cast<std::size_t>(spec.groups)) throw ArgumentError("warm start xi has wrong size");
        for (int g = 0; g < spec.groups; ++g) {
            const auto gi = static_cast<std::size_t>(g);
            state.xi[gi] = start.xi[gi];
            state.lambda[gi] = state.xi[gi].unaryExpr([](double v) { return jj_lambda(v); });
        }
    }
    state.z = start.z;
    rep.n_obs = resp.weights.sum();

    Eigen::VectorXd eta;
    int pseudo = 0;
    int clamped = 0;
    update_posteriors(resp, fit.params, state);
    for (int iter = 1; iter <= ctrl.max_iter; ++iter) {
        if (iter > 1) state.z = estep_responsibilities(fit.params.eta, state.bound);
        check_groups(resp, state.z, eta);
        fit.params.eta = eta;

        for (int sweep = 0; sweep < ctrl.inner_sweeps; ++sweep) {
            update_xi(fit.params, state);
            update_posteriors(resp, fit.params, state);
        }
        const MStepInfo info = spec.mode == SlopeMode::Common ? mstep_common(resp, state, fit.params)
                                                              : mstep_free(resp, state, fit.params);
        pseudo += info.pseudo_inverse_solves;
        clamped = info.clamped_intercepts;

        update_posteriors(resp, fit.params, state);
        update_bounds(resp, fit.params, state);
        const double ell = variational_loglik(resp, fit.params.eta, state.bound);
        if (!std::isfinite(ell)) throw NumericalError("variational log-likelihood is not finite");
        rep.bound_trace.push_back(ell);
        rep.n_iter = iter;
        if (aitken_stop(rep.bound_trace, ctrl.tol)) {
            rep.converged = true;
            break;
        }
    }
    // Settle xi at the fitted parameters so the reported bound is the tight one.
    for (int sweep = 0; sweep < kFinalXiSweeps; ++sweep) {
        const std::vector<Eigen::MatrixXd> previous = state.xi;
        update_xi(fit.params, state);
        update_posteriors(resp, fit.params, state);
        double change = 0.0;
        for (std::size_t g = 0; g < previous.size(); ++g) {
            change = std::max(change, (state.xi[g] - previous[g]).cwiseAbs().maxCoeff());
        }
        if (change < 1e-12) break;
    }
    update_bounds(resp, fit.params, state);
    rep.loglik_bound = variational_loglik(resp, fit.params.eta, state.bound);
    if (pseudo > 0) {
        rep.warnings.push_back("pseudo-inverse used for " + std::to_string(pseudo) + " singular M-step systems");
    }
    if (clamped > 0) {
        rep.warnings.push_back(std::to_string(clamped) + " intercepts clamped to |b| <= " +
                               std::to_string(static_cast<int>(kInterceptLimit)));
    }
    if (!rep.converged) rep.warnings.push_back("reached max_iter without meeting the Aitken criterion");
    finish(data, ctrl, fit);
    return fit;
}

}  // namespace mlta

#include "mlta/lca.hpp"

#include <cmath>
#include <random>

#include "mlta/errors.hpp"
#include "mlta/numeric.hpp"

namespace mlta {

namespace {

struct EStep {
    Eigen::MatrixXd z;
    double loglik = 0.0;
};

EStep expectation(const BinaryData& data, const LcaParameters& p) {
    const auto n_rows = static_cast<Eigen::Index>(data.n_rows());
    const auto groups = p.eta.size();
    const Eigen::ArrayXXd log_pi = p.pi.array().log();
    const Eigen::ArrayXXd log_1mpi = (1.0 - p.pi.array()).log();
    const Eigen::ArrayXd log_eta = p.eta.array().log();

    EStep out;
    out.z.resize(n_rows, groups);
    Eigen::VectorXd v(groups);
    for (Eigen::Index n = 0; n < n_rows; ++n) {
        const auto row = data.row(static_cast<std::size_t>(n));
        for (Eigen::Index g = 0; g < groups; ++g) {
            double s = log_eta[g];
            for (Eigen::Index m = 0; m < p.pi.rows(); ++m) {
                s += row[static_cast<std::size_t>(m)] ? log_pi(m, g) : log_1mpi(m, g);
            }
            v[g] = s;
        }
        const double lse = log_sum_exp(std::span<const double>(v.data(), v.size()));
        out.z.row(n) = (v.array() - lse).exp().transpose();
        const double w = data.weight(static_cast<std::size_t>(n));
        if (w > 0.0) out.loglik += w * lse;
    }
    return out;
}

LcaParameters maximization(const BinaryData& data, const Eigen::MatrixXd& z, bool& saturated) {
    const auto groups = z.cols();
    const auto n_vars = static_cast<Eigen::Index>(data.n_vars());
    LcaParameters p;
    p.eta = Eigen::VectorXd::Zero(groups);
    p.pi = Eigen::MatrixXd::Zero(n_vars, groups);
    double total = 0.0;
    for (Eigen::Index n = 0; n < z.rows(); ++n) {
        const double w = data.weight(static_cast<std::size_t>(n));
        if (w <= 0.0) continue;
        total += w;
        const auto row = data.row(static_cast<std::size_t>(n));
        for (Eigen::Index g = 0; g < groups; ++g) {
            const double wz = w * z(n, g);
            p.eta[g] += wz;
            for (Eigen::Index m = 0; m < n_vars; ++m) {
                if (row[static_cast<std::size_t>(m)]) p.pi(m, g) += wz;
            }
        }
    }
    for (Eigen::Index g = 0; g < groups; ++g) {
        if (p.eta[g] < 1.0) throw DegenerateGroup(static_cast<int>(g), p.eta[g]);
        p.pi.col(g) /= p.eta[g];
    }
    p.eta /= total;
    saturated = false;
    for (Eigen::Index i = 0; i < p.pi.size(); ++i) {
        double& v = p.pi.data()[i];
        if (v < kPiClamp || v > 1.0 - kPiClamp) {
            saturated = true;
            v = std::clamp(v, kPiClamp, 1.0 - kPiClamp);
        }
    }
    return p;
}

}  // namespace

Eigen::MatrixXd random_assignment(std::size_t n_rows, int groups, std::uint64_t seed) {
    if (groups < 1) throw ArgumentError("groups must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, groups - 1);
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_rows), groups);
    for (Eigen::Index n = 0; n < z.rows(); ++n) z(n, pick(rng)) = 1.0;
    return z;
}

double lca_loglik(const BinaryData& data, const LcaParameters& params) {
    return expectation(data, params).loglik;
}

MltaParameters to_mlta(const LcaParameters& params) {
    MltaParameters out;
    out.spec = ModelSpec{static_cast<int>(params.eta.size()), 0, SlopeMode::Free};
    out.eta = params.eta;
    out.intercept = params.pi.unaryExpr([](double p) { return logit(p); });
    return out;
}

LcaFit fit_lca(const BinaryData& data, int groups, const InitPolicy& init, const FitControl& ctrl) {
    ctrl.validate();
    if (groups < 1) throw ArgumentError("groups must be >= 1");
    if (data.empty() || data.n_vars() == 0) throw ArgumentError("fit_lca needs non-empty data");

    LcaFit fit;
    if (init.params) {
        fit.params = *init.params;
        if (fit.params.eta.size() != groups || fit.params.pi.cols() != groups ||
            fit.params.pi.rows() != static_cast<Eigen::Index>(data.n_vars())) {
            throw ArgumentError("initial LCA parameters have the wrong shape");
        }
    } else {
        Eigen::MatrixXd z0 = init.z ? *init.z : random_assignment(data.n_rows(), groups, init.seed);
        if (z0.rows() != static_cast<Eigen::Index>(data.n_rows()) || z0.cols() != groups) {
            throw ArgumentError("initial responsibilities have the wrong shape");
        }
        fit.params = maximization(data, z0, fit.saturated);
    }

    for (int iter = 1; iter <= ctrl.max_iter; ++iter) {
        EStep e = expectation(data, fit.params);
        fit.z = std::move(e.z);
        fit.loglik = e.loglik;
        fit.trace.push_back(e.loglik);
        fit.n_iter = iter;
        if (aitken_stop(fit.trace, ctrl.tol)) {
            fit.converged = true;
            break;
        }
        fit.params = maximization(data, fit.z, fit.saturated);
    }
    return fit;
}

}  // namespace mlta

#include "mlta/variational.hpp"

#include <algorithm>
#include <cmath>

#include "mlta/errors.hpp"
#include "mlta/numeric.hpp"

namespace mlta {

namespace {

// Row m holds vec(w_m w_m') for the slope matrix W (M x D).
RowMatrixXd outer_products(const Eigen::MatrixXd& w) {
    const Eigen::Index d = w.cols();
    RowMatrixXd out(w.rows(), d * d);
    for (Eigen::Index m = 0; m < w.rows(); ++m) {
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) out(m, i + d * j) = w(m, i) * w(m, j);
        }
    }
    return out;
}

// Sufficient statistics of one group for the (w, b) systems:
// system(m) = sum_n w_n z_ng (-2 lambda_nmg) E[yhat yhat'] (row-major (D+1)^2),
// rhs(m)    = sum_n w_n z_ng (x_nm - 1/2) E[yhat].
struct GroupSystems {
    RowMatrixXd system;
    Eigen::MatrixXd rhs;
};

GroupSystems group_systems(const Responses& resp, const VariationalState& state, int g, int dim) {
    const Eigen::Index n = resp.n_rows();
    const Eigen::Index e = dim + 1;
    const Eigen::ArrayXd wz = resp.weights.array() * state.z.col(g).array();

    RowMatrixXd moments(n, e * e);
    Eigen::MatrixXd mean_hat(n, e);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Map<Eigen::MatrixXd> block(moments.row(r).data(), e, e);
        if (dim > 0) {
            const Eigen::Map<const Eigen::MatrixXd> c(state.cov[static_cast<std::size_t>(g)].row(r).data(), dim, dim);
            const Eigen::VectorXd mu = state.mu[static_cast<std::size_t>(g)].row(r).transpose();
            block.topLeftCorner(dim, dim) = c + mu * mu.transpose();
            block.topRightCorner(dim, 1) = mu;
            block.bottomLeftCorner(1, dim) = mu.transpose();
            mean_hat.row(r).head(dim) = mu.transpose();
        }
        block(dim, dim) = 1.0;
        mean_hat(r, dim) = 1.0;
    }
    const Eigen::MatrixXd coef =
        (-2.0 * state.lambda[static_cast<std::size_t>(g)].array()).colwise() * wz;
    const Eigen::MatrixXd centred = resp.centered.array().colwise() * wz;

    GroupSystems out;
    out.system = coef.transpose() * moments;
    out.rhs = centred.transpose() * mean_hat;
    return out;
}

// Solves the positive-definite system, falling back to a pseudo-inverse.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs, MStepInfo& info) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
        Eigen::VectorXd x = llt.solve(rhs);
        if (x.allFinite()) return x;
    }
    ++info.pseudo_inverse_solves;
    return a.completeOrthogonalDecomposition().pseudoInverse() * rhs;
}

void clamp_intercepts(MltaParameters& params, MStepInfo& info) {
    for (Eigen::Index i = 0; i < params.intercept.size(); ++i) {
        double& b = params.intercept.data()[i];
        if (std::abs(b) > kInterceptLimit) {
            b = std::clamp(b, -kInterceptLimit, kInterceptLimit);
            ++info.clamped_intercepts;
        }
    }
}

}  // namespace

double variational_term(int x, double intercept, const Eigen::Ref<const Eigen::VectorXd>& slope,
                        const Eigen::Ref<const Eigen::VectorXd>& trait, double xi) {
    const double a = (2.0 * x - 1.0) * (intercept + slope.dot(trait));
    return log_sigmoid(xi) + 0.5 * (a - xi) + jj_lambda(xi) * (a * a - xi * xi);
}

Eigen::MatrixXd estep_responsibilities(const Eigen::VectorXd& eta, const Eigen::MatrixXd& bounds) {
    if (bounds.cols() != eta.size()) throw ArgumentError("bounds and eta disagree on the number of groups");
    const Eigen::ArrayXd log_eta = eta.array().log();
    Eigen::MatrixXd z(bounds.rows(), bounds.cols());
    Eigen::VectorXd v(bounds.cols());
    for (Eigen::Index n = 0; n < bounds.rows(); ++n) {
        v = bounds.row(n).transpose().array() + log_eta;
        const double lse = log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
        z.row(n) = (v.array() - lse).exp().transpose();
    }
    return z;
}

PosteriorMoments posterior_update(std::span<const std::uint8_t> x_row, const MltaParameters& params, int g,
                                  const Eigen::Ref<const Eigen::VectorXd>& xi_row) {
    const int d = params.dim();
    if (d < 1) throw ArgumentError("posterior_update requires D >= 1");
    const auto& w = params.slope(g);
    Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(d);
    for (Eigen::Index m = 0; m < w.rows(); ++m) {
        const double lam = jj_lambda(xi_row[m]);
        const Eigen::VectorXd wm = w.row(m).transpose();
        precision -= 2.0 * lam * wm * wm.transpose();
        r += (x_row[static_cast<std::size_t>(m)] - 0.5 + 2.0 * lam * params.intercept(m, g)) * wm;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
    PosteriorMoments out;
    out.cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
    out.mean = out.cov * r;
    return out;
}

double xi_update(const MltaParameters& params, int g, int m, const Eigen::Ref<const Eigen::MatrixXd>& cov,
                 const Eigen::Ref<const Eigen::VectorXd>& mean) {
    const Eigen::VectorXd w = params.slope(g).row(m).transpose();
    const double b = params.intercept(m, g);
    const double shift = w.dot(mean) + b;
    const double second = w.dot(cov * w) + shift * shift;
    return std::sqrt(std::max(second, 1e-24));
}

double lower_bound(std::span<const std::uint8_t> x_row, const MltaParameters& params, int g,
                   const Eigen::Ref<const Eigen::VectorXd>& xi_row, const Eigen::Ref<const Eigen::MatrixXd>& cov,
                   const Eigen::Ref<const Eigen::VectorXd>& mean) {
    double total = 0.0;
    for (Eigen::Index m = 0; m < params.intercept.rows(); ++m) {
        const double xi = xi_row[m];
        const double lam = jj_lambda(xi);
        const double b = params.intercept(m, g);
        total += log_sigmoid(xi) - 0.5 * xi - lam * xi * xi + (x_row[static_cast<std::size_t>(m)] - 0.5) * b +
                 lam * b * b;
    }
    if (params.dim() > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) throw NumericalError("posterior covariance is not positive definite");
        const Eigen::MatrixXd l = llt.matrixL();
        total += l.diagonal().array().log().sum();
        total += 0.5 * mean.dot(llt.solve(mean));
    }
    return total;
}

Responses::Responses(const BinaryData& data)
    : centered(static_cast<Eigen::Index>(data.n_rows()), static_cast<Eigen::Index>(data.n_vars())),
      weights(static_cast<Eigen::Index>(data.n_rows())) {
    for (std::size_t n = 0; n < data.n_rows(); ++n) {
        const auto row = data.row(n);
        for (std::size_t m = 0; m < data.n_vars(); ++m) {
            centered(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = row[m] - 0.5;
        }
        weights[static_cast<Eigen::Index>(n)] = data.weight(n);
    }
}

VariationalState VariationalState::init(Eigen::Index n_rows, Eigen::Index n_vars, int groups, int dim, double xi0) {
    VariationalState s;
    s.z = Eigen::MatrixXd::Constant(n_rows, groups, 1.0 / groups);
    for (int g = 0; g < groups; ++g) {
        s.xi.push_back(Eigen::MatrixXd::Constant(n_rows, n_vars, xi0));
        s.lambda.push_back(Eigen::MatrixXd::Constant(n_rows, n_vars, jj_lambda(xi0)));
        s.mu.push_back(Eigen::MatrixXd::Zero(n_rows, dim));
        RowMatrixXd c = RowMatrixXd::Zero(n_rows, dim * dim);
        for (int i = 0; i < dim; ++i) c.col(i + dim * i).setOnes();
        s.cov.push_back(std::move(c));
    }
    s.log_det_cov = Eigen::MatrixXd::Zero(n_rows, groups);
    s.mean_quad = Eigen::MatrixXd::Zero(n_rows, groups);
    s.bound = Eigen::MatrixXd::Zero(n_rows, groups);
    return s;
}

Eigen::MatrixXd VariationalState::covariance(Eigen::Index n, int g) const {
    const auto& c = cov[static_cast<std::size_t>(g)];
    const auto d = static_cast<Eigen::Index>(std::lround(std::sqrt(static_cast<double>(c.cols()))));
    return Eigen::Map<const Eigen::MatrixXd>(c.row(n).data(), d, d);
}

void VariationalState::permute_groups(const std::vector<int>& order) {
    VariationalState old = *this;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto src = static_cast<std::size_t>(order[i]);
        const auto dst = static_cast<Eigen::Index>(i);
        z.col(dst) = old.z.col(order[i]);
        xi[i] = old.xi[src];
        lambda[i] = old.lambda[src];
        mu[i] = old.mu[src];
        cov[i] = old.cov[src];
        log_det_cov.col(dst) = old.log_det_cov.col(order[i]);
        mean_quad.col(dst) = old.mean_quad.col(order[i]);
        bound.col(dst) = old.bound.col(order[i]);
    }
}

void update_posteriors(const Responses& resp, const MltaParameters& params, VariationalState& state) {
    const int d = params.dim();
    const Eigen::Index n_rows = resp.n_rows();
    if (d == 0) {
        state.log_det_cov.setZero();
        state.mean_quad.setZero();
        return;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(d);
    Eigen::MatrixXd precision(d, d);
    Eigen::VectorXd r(d);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
    for (int g = 0; g < params.groups(); ++g) {
        const auto gi = static_cast<std::size_t>(g);
        const Eigen::MatrixXd& w = params.slope(g);
        const RowMatrixXd outer = outer_products(w);
        const Eigen::MatrixXd& lam = state.lambda[gi];

        RowMatrixXd prec_flat = (-2.0 * lam) * outer;
        const Eigen::MatrixXd drive =
            resp.centered + 2.0 * (lam.array().rowwise() * params.intercept.col(g).transpose().array()).matrix();
        const Eigen::MatrixXd rhs = drive * w;

        auto& cov = state.cov[gi];
        auto& mu = state.mu[gi];
        for (Eigen::Index n = 0; n < n_rows; ++n) {
            precision = Eigen::Map<const Eigen::MatrixXd>(prec_flat.row(n).data(), d, d) + identity;
            llt.compute(precision);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("posterior precision is not positive definite");
            }
            r = rhs.row(n).transpose();
            Eigen::Map<Eigen::MatrixXd>(cov.row(n).data(), d, d) = llt.solve(identity);
            const Eigen::VectorXd mean = llt.solve(r);
            mu.row(n) = mean.transpose();
            state.log_det_cov(n, g) = -2.0 * llt.matrixLLT().diagonal().array().log().sum();
            state.mean_quad(n, g) = mean.dot(r);
        }
    }
}

void update_xi(const MltaParameters& params, VariationalState& state) {
    const int d = params.dim();
    for (int g = 0; g < params.groups(); ++g) {
        const auto gi = static_cast<std::size_t>(g);
        auto& xi = state.xi[gi];
        if (d == 0) {
            xi = params.intercept.col(g).transpose().cwiseAbs().replicate(xi.rows(), 1);
        } else {
            const Eigen::MatrixXd& w = params.slope(g);
            const RowMatrixXd outer = outer_products(w);
            const Eigen::MatrixXd spread = state.cov[gi] * outer.transpose();
            Eigen::MatrixXd shift = state.mu[gi] * w.transpose();
            shift.rowwise() += params.intercept.col(g).transpose();
            xi = (spread.array() + shift.array().square()).max(1e-24).sqrt().matrix();
        }
        state.lambda[gi] = xi.unaryExpr([](double v) { return jj_lambda(v); });
    }
}

void update_bounds(const Responses& resp, const MltaParameters& params, VariationalState& state) {
    for (int g = 0; g < params.groups(); ++g) {
        const auto gi = static_cast<std::size_t>(g);
        const Eigen::ArrayXXd xi = state.xi[gi].array();
        const Eigen::ArrayXXd lam = state.lambda[gi].array();
        const Eigen::ArrayXd b = params.intercept.col(g).array();
        Eigen::ArrayXXd terms = xi.unaryExpr([](double v) { return log_sigmoid(v); }) - 0.5 * xi - lam * xi.square();
        terms += resp.centered.array().rowwise() * b.transpose();
        terms += lam.rowwise() * b.square().transpose();
        state.bound.col(g) = terms.rowwise().sum().matrix() + 0.5 * (state.log_det_cov.col(g) + state.mean_quad.col(g));
    }
}

double variational_loglik(const Responses& resp, const Eigen::VectorXd& eta, const Eigen::MatrixXd& bounds) {
    const Eigen::ArrayXd log_eta = eta.array().log();
    Eigen::VectorXd v(bounds.cols());
    double total = 0.0;
    for (Eigen::Index n = 0; n < bounds.rows(); ++n) {
        if (resp.weights[n] <= 0.0) continue;
        v = bounds.row(n).transpose().array() + log_eta;
        total += resp.weights[n] * log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    }
    return total;
}

MStepInfo mstep_free(const Responses& resp, const VariationalState& state, MltaParameters& params) {
    MStepInfo info;
    const int d = params.dim();
    const Eigen::Index e = d + 1;
    for (int g = 0; g < params.groups(); ++g) {
        const GroupSystems sys = group_systems(resp, state, g, d);
        for (Eigen::Index m = 0; m < resp.n_vars(); ++m) {
            const Eigen::Map<const Eigen::MatrixXd> a(sys.system.row(m).data(), e, e);
            const Eigen::VectorXd sol = solve_spd(a, sys.rhs.row(m).transpose(), info);
            if (d > 0) params.slope(g).row(m) = sol.head(d).transpose();
            params.intercept(m, g) = sol[d];
        }
    }
    clamp_intercepts(params, info);
    return info;
}

MStepInfo mstep_common(const Responses& resp, const VariationalState& state, MltaParameters& params) {
    const int d = params.dim();
    const int groups = params.groups();
    if (d < 1) throw ArgumentError("common slopes require D >= 1");
    MStepInfo info;
    const Eigen::Index e = d + 1;
    std::vector<GroupSystems> systems;
    systems.reserve(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) systems.push_back(group_systems(resp, state, g, d));

    const Eigen::Index size = d + groups;
    Eigen::MatrixXd k(size, size);
    Eigen::VectorXd gamma(size);
    for (Eigen::Index m = 0; m < resp.n_vars(); ++m) {
        k.setZero();
        gamma.setZero();
        for (int g = 0; g < groups; ++g) {
            const auto& sys = systems[static_cast<std::size_t>(g)];
            const Eigen::Map<const Eigen::MatrixXd> a(sys.system.row(m).data(), e, e);
            k.topLeftCorner(d, d) += a.topLeftCorner(d, d);
            k.block(0, d + g, d, 1) = a.topRightCorner(d, 1);
            k.block(d + g, 0, 1, d) = a.bottomLeftCorner(1, d);
            k(d + g, d + g) = a(d, d);
            gamma.head(d) += sys.rhs.row(m).head(d).transpose();
            gamma[d + g] = sys.rhs(m, d);
        }
        const Eigen::VectorXd sol = solve_spd(k, gamma, info);
        params.slopes.front().row(m) = sol.head(d).transpose();
        for (int g = 0; g < groups; ++g) params.intercept(m, g) = sol[d + g];
    }
    clamp_intercepts(params, info);
    return info;
}

}  // namespace mlta

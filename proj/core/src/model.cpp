#include "mlta/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlta/errors.hpp"
#include "mlta/numeric.hpp"

namespace mlta {

std::string to_string(SlopeMode mode) { return mode == SlopeMode::Free ? "free" : "common"; }

SlopeMode slope_mode_from_string(const std::string& s) {
    if (s == "free") return SlopeMode::Free;
    if (s == "common") return SlopeMode::Common;
    throw ArgumentError("unknown slope mode '" + s + "' (expected free or common)");
}

void ModelSpec::validate() const {
    if (groups < 1) throw ArgumentError("number of groups must be >= 1");
    if (dim < 0) throw ArgumentError("trait dimension must be >= 0");
    if (mode == SlopeMode::Common && dim < 1) throw ArgumentError("common slopes require dim >= 1");
}

std::string describe(const ModelSpec& spec) {
    return "G=" + std::to_string(spec.groups) + " D=" + std::to_string(spec.dim) + " " + to_string(spec.mode);
}

MltaParameters MltaParameters::zeros(const ModelSpec& spec, int n_vars) {
    spec.validate();
    MltaParameters p;
    p.spec = spec;
    p.eta = Eigen::VectorXd::Constant(spec.groups, 1.0 / spec.groups);
    p.intercept = Eigen::MatrixXd::Zero(n_vars, spec.groups);
    if (spec.dim > 0) {
        const int slabs = spec.mode == SlopeMode::Common ? 1 : spec.groups;
        p.slopes.assign(static_cast<std::size_t>(slabs), Eigen::MatrixXd::Zero(n_vars, spec.dim));
    }
    return p;
}

void MltaParameters::validate() const {
    spec.validate();
    if (eta.size() != spec.groups) throw ArgumentError("eta has wrong length");
    if (intercept.cols() != spec.groups) throw ArgumentError("intercept matrix has wrong number of columns");
    const std::size_t slabs = spec.dim == 0 ? 0 : (spec.mode == SlopeMode::Common ? 1 : spec.groups);
    if (slopes.size() != slabs) throw ArgumentError("wrong number of slope matrices");
    for (const auto& w : slopes) {
        if (w.rows() != intercept.rows() || w.cols() != spec.dim) throw ArgumentError("slope matrix has wrong shape");
        if (!w.allFinite()) throw ArgumentError("slopes must be finite");
    }
    if (!intercept.allFinite()) throw ArgumentError("intercepts must be finite");
    if ((eta.array() < 0.0).any() || std::abs(eta.sum() - 1.0) > 1e-8) {
        throw ArgumentError("eta must lie on the simplex");
    }
}

double response_prob(double intercept, const Eigen::Ref<const Eigen::VectorXd>& slope,
                     const Eigen::Ref<const Eigen::VectorXd>& trait) {
    return sigmoid(intercept + slope.dot(trait));
}

ParameterCount count_params(const ModelSpec& spec, int n_vars) {
    spec.validate();
    const int g = spec.groups;
    const int d = spec.dim;
    const int m = n_vars;
    const int loadings = m * d - d * (d - 1) / 2;
    ParameterCount c;
    if (d == 0) {
        c.k = (g - 1) + g * m;
        c.k_star = m;
    } else if (spec.mode == SlopeMode::Free) {
        c.k = (g - 1) + g * m + g * loadings;
        c.k_star = m + loadings;
    } else {
        c.k = (g - 1) + g * m + loadings;
        c.k_star = m;
    }
    return c;
}

std::vector<int> sort_groups_by_eta(MltaParameters& params) {
    std::vector<int> order(static_cast<std::size_t>(params.groups()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return params.eta[a] > params.eta[b]; });
    MltaParameters sorted = params;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int old = order[i];
        sorted.eta[static_cast<Eigen::Index>(i)] = params.eta[old];
        sorted.intercept.col(static_cast<Eigen::Index>(i)) = params.intercept.col(old);
        if (params.dim() > 0 && params.spec.mode == SlopeMode::Free) {
            sorted.slopes[i] = params.slopes[static_cast<std::size_t>(old)];
        }
    }
    params = std::move(sorted);
    return order;
}

}  // namespace mlta

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace mlta {

enum class SlopeMode { Free, Common };

std::string to_string(SlopeMode mode);
SlopeMode slope_mode_from_string(const std::string& s);

/// Number of groups, trait dimension and slope sharing.
struct ModelSpec {
    int groups = 1;
    int dim = 0;
    SlopeMode mode = SlopeMode::Free;

    /// Throws ArgumentError unless groups >= 1, dim >= 0 and COMMON has dim >= 1.
    void validate() const;
    bool is_lca() const noexcept { return dim == 0; }

    bool operator==(const ModelSpec&) const = default;
};

std::string describe(const ModelSpec& spec);

/// Mixing weights, intercepts and slopes of a fitted mixture.
///
/// `intercept` is M x G in log-odds units. `slopes` holds G matrices of size
/// M x D in FREE mode and a single shared M x D matrix in COMMON mode; it is
/// empty when D = 0.
struct MltaParameters {
    ModelSpec spec;
    Eigen::VectorXd eta;
    Eigen::MatrixXd intercept;
    std::vector<Eigen::MatrixXd> slopes;

    int groups() const noexcept { return spec.groups; }
    int dim() const noexcept { return spec.dim; }
    int n_vars() const noexcept { return static_cast<int>(intercept.rows()); }

    /// Slope matrix in effect for group g (M x D).
    const Eigen::MatrixXd& slope(int g) const {
        return spec.mode == SlopeMode::Common ? slopes.front() : slopes[static_cast<std::size_t>(g)];
    }
    Eigen::MatrixXd& slope(int g) {
        return spec.mode == SlopeMode::Common ? slopes.front() : slopes[static_cast<std::size_t>(g)];
    }

    /// All-zero slopes, zero intercepts and uniform eta.
    static MltaParameters zeros(const ModelSpec& spec, int n_vars);

    /// Throws ArgumentError on shape mismatch, non-finite entries or eta off the simplex.
    void validate() const;
};

/// Logistic response probability sigma(b + w'y).
double response_prob(double intercept, const Eigen::Ref<const Eigen::VectorXd>& slope,
                     const Eigen::Ref<const Eigen::VectorXd>& trait);

struct ParameterCount {
    int k = 0;       ///< free parameters
    int k_star = 0;  ///< parameters estimated from each group's observations alone
};

ParameterCount count_params(const ModelSpec& spec, int n_vars);

/// Reorders groups by decreasing eta. Returns the permutation: new index i
/// holds old group order[i].
std::vector<int> sort_groups_by_eta(MltaParameters& params);

}  // namespace mlta

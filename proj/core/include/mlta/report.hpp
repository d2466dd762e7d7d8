#pragma once

#include <Eigen/Dense>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mlta/diagnostics.hpp"
#include "mlta/fit.hpp"
#include "mlta/inference.hpp"
#include "mlta/model.hpp"

namespace mlta {

/// Fit report as JSON:
///   spec {groups, dim, mode}, variables, eta [G], b [M][G],
///   w [slope matrices][M][D], loglik_gh, loglik_bound, quadrature_q,
///   lower_bound_trace, k, k_star, bic, bic_star, n_obs, n_iter, converged,
///   warnings, seed, classification (one-based labels per row).
void write_fit_report(std::ostream& out, const MltaParameters& params, const FitReport& report,
                      const std::vector<std::string>& variables = {});

struct LoadedReport {
    MltaParameters params;
    FitReport report;
    std::vector<std::string> variables;
};

/// Reads a report written by write_fit_report. Throws ArgumentError on
/// malformed input.
LoadedReport read_fit_report(std::istream& in);

/// Parameters from JSON holding at least b and (for D > 0) w. `spec` and
/// `eta` are optional: G comes from b, D from w, mode from spec.mode or the
/// number of slope matrices, and eta defaults to uniform.
MltaParameters read_params_json(std::istream& in);

/// Long grid layout: header G,D,mode,loglik,k,k_star,bic,bic_star,converged.
void write_grid_csv(std::ostream& out, const GridResult& grid);

/// Table layout for one criterion ("loglik", "bic" or "bic_star"): one row per
/// G, one column per (D, mode) pair.
void write_grid_table_csv(std::ostream& out, const GridResult& grid, const std::string& criterion);

void write_grid_json(std::ostream& out, const GridResult& grid);

/// Square matrix as CSV with the given labels as header and first column.
void write_labeled_matrix_csv(std::ostream& out, const Eigen::MatrixXd& mat, const std::vector<std::string>& labels);

void write_diagnostics_json(std::ostream& out, const FitDiagnostics& diag);

void write_jackknife_json(std::ostream& out, const JackknifeReport& jk);

}  // namespace mlta

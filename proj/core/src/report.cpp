#include "mlta/report.hpp"

#include <charconv>
#include <cmath>
#include <algorithm>
#include <map>
#include "json.hpp"

#include "mlta/errors.hpp"

namespace mlta {

namespace {

using nlohmann::json;

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json matrix_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols_if_empty, const char* what) {
    if (!j.is_array()) throw ArgumentError(std::string(what) + " must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.front().size()) : cols_if_empty;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw ArgumentError(std::string(what) + " rows must all have the same length");
        }
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json spec_json(const ModelSpec& s) {
    return {{"groups", s.groups}, {"dim", s.dim}, {"mode", to_string(s.mode)}};
}

ModelSpec spec_from(const json& j) {
    ModelSpec s;
    s.groups = j.at("groups").get<int>();
    s.dim = j.at("dim").get<int>();
    s.mode = slope_mode_from_string(j.at("mode").get<std::string>());
    s.validate();
    return s;
}

json params_json(const MltaParameters& p) {
    json w = json::array();
    for (const auto& s : p.slopes) w.push_back(matrix_json(s));
    return {{"spec", spec_json(p.spec)}, {"eta", vector_json(p.eta)}, {"b", matrix_json(p.intercept)}, {"w", w}};
}

MltaParameters params_from(const json& j) {
    MltaParameters p;
    p.intercept = matrix_from(j.at("b"), 0, "b");
    const auto groups = static_cast<int>(p.intercept.cols());
    std::vector<Eigen::MatrixXd> slopes;
    if (j.contains("w")) {
        for (const auto& wj : j.at("w")) slopes.push_back(matrix_from(wj, 0, "w"));
    }
    if (j.contains("spec")) {
        p.spec = spec_from(j.at("spec"));
    } else {
        p.spec.groups = groups;
        p.spec.dim = slopes.empty() ? 0 : static_cast<int>(slopes.front().cols());
        p.spec.mode = (slopes.size() == 1 && groups > 1) ? SlopeMode::Common : SlopeMode::Free;
    }
    if (p.spec.dim == 0) slopes.clear();
    p.slopes = std::move(slopes);
    if (j.contains("eta")) {
        const auto& e = j.at("eta");
        p.eta.resize(static_cast<Eigen::Index>(e.size()));
        for (std::size_t g = 0; g < e.size(); ++g) p.eta[static_cast<Eigen::Index>(g)] = e[g].get<double>();
    } else {
        p.eta = Eigen::VectorXd::Constant(groups, 1.0 / std::max(groups, 1));
    }
    p.validate();
    return p;
}

json parse(std::istream& in) {
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("invalid JSON: ") + e.what());
    }
}

std::string column_label(const GridRow& r) {
    return "D" + std::to_string(r.spec.dim) + (r.spec.dim == 0 ? "" : "_" + to_string(r.spec.mode));
}

}  // namespace

void write_fit_report(std::ostream& out, const MltaParameters& params, const FitReport& report,
                      const std::vector<std::string>& variables) {
    json j = params_json(params);
    j["variables"] = variables;
    j["loglik_gh"] = report.loglik_gh;
    j["loglik_bound"] = report.loglik_bound;
    j["quadrature_q"] = report.quadrature_q;
    j["lower_bound_trace"] = report.bound_trace;
    j["k"] = report.k;
    j["k_star"] = report.k_star;
    j["bic"] = report.bic;
    j["bic_star"] = report.bic_star;
    j["n_obs"] = report.n_obs;
    j["n_iter"] = report.n_iter;
    j["converged"] = report.converged;
    j["warnings"] = report.warnings;
    j["seed"] = report.seed;
    json labels = json::array();
    for (int c : report.classification) labels.push_back(c + 1);
    j["classification"] = labels;
    out << j.dump(2) << '\n';
}

LoadedReport read_fit_report(std::istream& in) {
    const json j = parse(in);
    LoadedReport r;
    try {
        r.params = params_from(j);
        r.report.spec = r.params.spec;
        r.report.loglik_gh = j.at("loglik_gh").get<double>();
        r.report.loglik_bound = j.value("loglik_bound", r.report.loglik_gh);
        r.report.quadrature_q = j.value("quadrature_q", 0);
        r.report.bound_trace = j.value("lower_bound_trace", std::vector<double>{});
        r.report.k = j.value("k", 0);
        r.report.k_star = j.value("k_star", 0);
        r.report.bic = j.value("bic", 0.0);
        r.report.bic_star = j.value("bic_star", 0.0);
        r.report.n_obs = j.value("n_obs", 0.0);
        r.report.n_iter = j.value("n_iter", 0);
        r.report.converged = j.value("converged", false);
        r.report.warnings = j.value("warnings", std::vector<std::string>{});
        r.report.seed = j.value("seed", std::uint64_t{0});
        for (int c : j.value("classification", std::vector<int>{})) r.report.classification.push_back(c - 1);
        r.variables = j.value("variables", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("malformed fit report: ") + e.what());
    }
    return r;
}

MltaParameters read_params_json(std::istream& in) {
    const json j = parse(in);
    try {
        return params_from(j);
    } catch (const json::exception& e) {
        throw ArgumentError(std::string("malformed parameter file: ") + e.what());
    }
}

void write_grid_csv(std::ostream& out, const GridResult& grid) {
    out << "G,D,mode,loglik,k,k_star,bic,bic_star,converged\n";
    for (const auto& r : grid.rows) {
        out << r.spec.groups << ',' << r.spec.dim << ',' << to_string(r.spec.mode) << ',' << num(r.loglik) << ','
            << r.k << ',' << r.k_star << ',' << num(r.bic) << ',' << num(r.bic_star) << ','
            << (r.converged ? "true" : "false") << '\n';
    }
}

void write_grid_table_csv(std::ostream& out, const GridResult& grid, const std::string& criterion) {
    auto pick = [&](const GridRow& r) {
        if (criterion == "loglik") return r.loglik;
        if (criterion == "bic") return r.bic;
        if (criterion == "bic_star") return r.bic_star;
        throw ArgumentError("unknown criterion '" + criterion + "'");
    };
    std::vector<std::string> columns;
    std::map<int, std::map<std::string, double>> table;
    for (const auto& r : grid.rows) {
        const std::string col = column_label(r);
        if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
        table[r.spec.groups][col] = pick(r);
    }
    out << 'G';
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    for (const auto& [g, cells] : table) {
        out << g;
        for (const auto& c : columns) {
            out << ',';
            if (auto it = cells.find(c); it != cells.end()) out << num(it->second);
        }
        out << '\n';
    }
}

void write_grid_json(std::ostream& out, const GridResult& grid) {
    json rows = json::array();
    for (const auto& r : grid.rows) {
        json row = {{"spec", spec_json(r.spec)}, {"loglik", r.loglik}, {"k", r.k}, {"k_star", r.k_star},
                    {"bic", r.bic}, {"bic_star", r.bic_star}, {"converged", r.converged},
                    {"failed", r.failed}, {"warnings", r.warnings}};
        rows.push_back(std::move(row));
    }
    json j = {{"rows", rows}};
    j["best_by_bic"] = grid.best_by_bic ? spec_json(*grid.best_by_bic) : json(nullptr);
    j["best_by_bic_star"] = grid.best_by_bic_star ? spec_json(*grid.best_by_bic_star) : json(nullptr);
    out << j.dump(2) << '\n';
}

void write_labeled_matrix_csv(std::ostream& out, const Eigen::MatrixXd& mat, const std::vector<std::string>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != mat.rows() || mat.rows() != mat.cols()) {
        throw ArgumentError("labels must match a square matrix");
    }
    out << "variable";
    for (const auto& l : labels) out << ',' << l;
    out << '\n';
    for (Eigen::Index i = 0; i < mat.rows(); ++i) {
        out << labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < mat.cols(); ++j) out << ',' << num(mat(i, j));
        out << '\n';
    }
}

void write_diagnostics_json(std::ostream& out, const FitDiagnostics& diag) {
    json j;
    j["bic"] = diag.bic;
    j["bic_star"] = diag.bic_star;
    if (diag.chi_sq) {
        const auto& c = *diag.chi_sq;
        j["chi_square"] = {{"statistic", c.statistic}, {"dof", c.dof}, {"applicable", c.applicable},
                           {"min_expected", c.min_expected},
                           {"p_value", c.p_value ? json(*c.p_value) : json(nullptr)}};
    }
    json sspr = json::array();
    for (const auto& e : diag.sspr) {
        sspr.push_back({{"threshold", e.threshold}, {"value", e.value}, {"n_patterns", e.n_patterns}});
    }
    j["sspr"] = sspr;
    j["median_probabilities"] = matrix_json(diag.median_probs);
    json std_w = json::array();
    for (const auto& w : diag.std_slopes) std_w.push_back(matrix_json(w));
    j["standardized_slopes"] = std_w;
    out << j.dump(2) << '\n';
}

void write_jackknife_json(std::ostream& out, const JackknifeReport& jk) {
    json w = json::array();
    for (const auto& s : jk.se_w) w.push_back(matrix_json(s));
    json j = {{"se_eta", vector_json(jk.se_eta)},
              {"se_b", matrix_json(jk.se_b)},
              {"se_w", w},
              {"se_median_prob", matrix_json(jk.se_median_prob)},
              {"n_refits", jk.n_refits},
              {"n_requested", jk.n_requested},
              {"warnings", jk.warnings}};
    out << j.dump(2) << '\n';
}

}  // namespace mlta

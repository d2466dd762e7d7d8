#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "mlta/data.hpp"
#include "mlta/diagnostics.hpp"
#include "mlta/errors.hpp"
#include "mlta/fit.hpp"
#include "mlta/inference.hpp"
#include "mlta/quadrature.hpp"
#include "mlta/report.hpp"
#include "mlta/variational.hpp"

namespace mlta::cli {

namespace {

struct InputFlags {
    std::string path;
    bool pattern = false;
    bool dense = false;
};

struct ControlFlags {
    double tol = 1e-2;
    int max_iter = 5000;
    std::uint64_t seed = 0;
    int starts = 10;
    int quadrature = 5;
    int inner_sweeps = 1;
    unsigned threads = 0;

    FitControl control() const {
        FitControl c;
        c.tol = tol;
        c.max_iter = max_iter;
        c.seed = seed;
        c.n_starts = starts;
        c.final_quadrature_q = quadrature;
        c.inner_sweeps = inner_sweeps;
        c.threads = threads;
        c.validate();
        return c;
    }
};

void add_input(CLI::App* cmd, InputFlags& in) {
    cmd->add_option("--input,-i", in.path, "binary data file")->required();
    auto* p = cmd->add_flag("--pattern", in.pattern, "input is pattern,count CSV");
    auto* d = cmd->add_flag("--dense", in.dense, "input is dense 0/1 CSV (default)");
    p->excludes(d);
}

void add_control(CLI::App* cmd, ControlFlags& c, bool starts) {
    cmd->add_option("--tol", c.tol, "Aitken tolerance")->capture_default_str();
    cmd->add_option("--max-iter", c.max_iter, "iteration cap")->capture_default_str();
    cmd->add_option("--seed", c.seed, "base seed; start s uses seed + s")->capture_default_str();
    if (starts) cmd->add_option("--starts", c.starts, "random starts")->capture_default_str();
    cmd->add_option("--quadrature,-q", c.quadrature, "Gauss-Hermite points per dimension")->capture_default_str();
    cmd->add_option("--inner-sweeps", c.inner_sweeps, "xi/posterior sweeps per iteration")->capture_default_str();
    cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores")->capture_default_str();
}

BinaryData load_input(const InputFlags& in) {
    return load_matrix_file(in.path, in.pattern ? MatrixFormat::PatternCsv : MatrixFormat::DenseCsv);
}

std::ofstream open_out(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write '" + path + "'");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot read '" + path + "'");
    return in;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& s : split_list(text)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size()) throw ArgumentError("not a number: '" + s + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::string> variable_names(const BinaryData& data) {
    if (!data.names().empty()) return data.names();
    std::vector<std::string> names;
    for (std::size_t m = 0; m < data.n_vars(); ++m) names.push_back("V" + std::to_string(m + 1));
    return names;
}

// Warm start from saved parameters: responsibilities from the quadrature
// posterior, xi from its default.
WarmStart warm_start_from(const BinaryData& data, const MltaParameters& params, int q) {
    WarmStart w;
    w.params = params;
    const QuadratureRule rule = params.dim() > 0 ? hermite_grid(q, params.dim()) : QuadratureRule{};
    w.z = estep_responsibilities(params.eta, component_log_density(data, params, rule));
    return w;
}

void print_fit(std::ostream& out, const FitReport& r) {
    out << describe(r.spec) << ": loglik " << r.loglik_gh << ", bound " << r.loglik_bound << ", k " << r.k
        << ", BIC " << r.bic << ", BIC* " << r.bic_star << ", iterations " << r.n_iter
        << (r.converged ? "" : " (not converged)") << '\n';
}

int cmd_encode(const std::string& input, bool header, const std::vector<std::string>& exclude,
               const std::string& yes, const std::string& no, const std::string& undecided, bool pattern_out,
               const std::string& out_path, std::ostream& out) {
    auto in = open_in(input);
    CategoricalTable table = load_categorical(in, header);
    // Resolve names first so indices refer to the original columns.
    std::vector<std::size_t> drop;
    for (const auto& e : exclude) {
        const auto it = std::find(table.column_names.begin(), table.column_names.end(), e);
        if (it != table.column_names.end()) {
            drop.push_back(static_cast<std::size_t>(it - table.column_names.begin()));
            continue;
        }
        std::size_t used = 0;
        long idx = 0;
        try {
            idx = std::stol(e, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != e.size() || idx < 1 || static_cast<std::size_t>(idx) > table.column_names.size()) {
            throw ArgumentError("unknown column '" + e + "'");
        }
        drop.push_back(static_cast<std::size_t>(idx - 1));
    }
    std::sort(drop.begin(), drop.end());
    drop.erase(std::unique(drop.begin(), drop.end()), drop.end());
    for (auto it = drop.rbegin(); it != drop.rend(); ++it) table = drop_column(table, *it);

    AbCoding coding;
    coding.yes = split_list(yes);
    coding.no = split_list(no);
    coding.undecided = split_list(undecided);
    const auto data = encode_categorical(table, coding);
    auto file = open_out(out_path);
    if (pattern_out) {
        write_pattern_csv(file, data);
    } else {
        write_dense_csv(file, data);
    }
    out << "encoded " << data.n_rows() << " rows into " << data.n_vars() << " binary variables\n";
    return kExitOk;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
    auto to_int = [&](const std::string& s) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (s.empty() || used != s.size()) throw ArgumentError("not an integer list: '" + text + "'");
        return v;
    };
    std::vector<int> out;
    for (const auto& part : split_list(text)) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(to_int(part));
            continue;
        }
        const int lo = to_int(part.substr(0, dots));
        const int hi = to_int(part.substr(dots + 2));
        if (hi < lo) throw ArgumentError("empty range '" + part + "'");
        for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
    if (out.empty()) throw ArgumentError("empty list");
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mixtures of latent trait analyzers for multivariate binary data", "mlta"};
    app.require_subcommand(1);

    // encode
    std::string enc_input, enc_out, enc_yes = "y", enc_no = "n", enc_undecided = "?";
    std::vector<std::string> enc_exclude;
    bool enc_header = false, enc_pattern = false;
    auto* encode = app.add_subcommand("encode", "categorical yes/no/undecided table to binary a/b coding");
    encode->add_option("--input,-i", enc_input, "categorical CSV")->required();
    encode->add_flag("--header", enc_header, "first row holds column names");
    encode->add_option("--exclude", enc_exclude, "column name or 1-based index to drop (repeatable)");
    encode->add_option("--yes", enc_yes, "comma-separated labels meaning yes")->capture_default_str();
    encode->add_option("--no", enc_no, "comma-separated labels meaning no")->capture_default_str();
    encode->add_option("--undecided", enc_undecided, "comma-separated labels meaning undecided")
        ->capture_default_str();
    encode->add_flag("--pattern-out", enc_pattern, "write pattern,count CSV instead of dense rows");
    encode->add_option("--out,-o", enc_out, "output CSV")->required();

    // fit
    InputFlags fit_in;
    ControlFlags fit_ctl;
    int fit_g = 1, fit_d = 0;
    bool fit_common = false;
    std::string fit_out;
    auto* fit = app.add_subcommand("fit", "multi-start fit of one model");
    add_input(fit, fit_in);
    fit->add_option("--G", fit_g, "number of groups")->required();
    fit->add_option("--D", fit_d, "latent trait dimension")->required();
    fit->add_flag("--common-slopes", fit_common, "share slopes across groups");
    add_control(fit, fit_ctl, true);
    fit->add_option("--out,-o", fit_out, "report JSON")->required();

    // select
    InputFlags sel_in;
    ControlFlags sel_ctl;
    std::string sel_g = "1..5", sel_d = "0..3", sel_modes = "free,common", sel_out, sel_json, sel_tables;
    auto* select = app.add_subcommand("select", "grid search over G, D and slope mode");
    add_input(select, sel_in);
    select->add_option("--G", sel_g, "groups, e.g. 1..5 or 1,2,4")->capture_default_str();
    select->add_option("--D", sel_d, "trait dimensions, e.g. 0..3")->capture_default_str();
    select->add_option("--modes", sel_modes, "free,common")->capture_default_str();
    add_control(select, sel_ctl, true);
    select->add_option("--out,-o", sel_out, "grid CSV")->required();
    select->add_option("--json", sel_json, "grid JSON");
    select->add_option("--tables", sel_tables, "prefix for G x (D, mode) tables of loglik, bic and bic_star");

    // diagnose
    InputFlags dia_in;
    std::string dia_report, dia_out, dia_lift, dia_sspr = "100,25,10";
    int dia_q = 0;
    auto* diag = app.add_subcommand("diagnose", "chi-square, SSPR and lift for a saved report");
    add_input(diag, dia_in);
    diag->add_option("--report", dia_report, "fit report JSON")->required();
    diag->add_option("--quadrature,-q", dia_q, "points per dimension (default: the report's)");
    diag->add_option("--sspr", dia_sspr, "SSPR truncation thresholds")->capture_default_str();
    diag->add_option("--lift", dia_lift, "prefix for per-group lift CSVs");
    diag->add_option("--out,-o", dia_out, "diagnostics JSON")->required();

    // simulate
    std::string sim_params, sim_eta, sim_out, sim_truth;
    std::size_t sim_n = 0;
    std::uint64_t sim_seed = 0;
    bool sim_pattern = false;
    auto* sim = app.add_subcommand("simulate", "draw data from given parameters");
    sim->add_option("--params", sim_params, "parameter JSON (b, w, optional eta and spec)")->required();
    sim->add_option("--eta", sim_eta, "mixing proportions, overriding the file");
    sim->add_option("--N", sim_n, "rows to draw")->required();
    sim->add_option("--seed", sim_seed, "random seed")->capture_default_str();
    sim->add_flag("--pattern-out", sim_pattern, "write pattern,count CSV");
    sim->add_option("--truth", sim_truth, "CSV of the true group (one-based) per row");
    sim->add_option("--out,-o", sim_out, "output CSV")->required();

    // jackknife
    InputFlags jk_in;
    ControlFlags jk_ctl;
    std::string jk_report, jk_out;
    int jk_stride = 1, jk_refit_iter = 20;
    auto* jack = app.add_subcommand("jackknife", "delete-one standard errors around a saved fit");
    add_input(jack, jk_in);
    jack->add_option("--report", jk_report, "fit report JSON")->required();
    add_control(jack, jk_ctl, false);
    jack->add_option("--stride", jk_stride, "refit every stride-th row")->capture_default_str();
    jack->add_option("--refit-iter", jk_refit_iter, "iterations per delete-one refit")->capture_default_str();
    jack->add_option("--out,-o", jk_out, "standard errors JSON")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "mlta: " << e.what() << '\n';
        return kExitDataError;
    }

    try {
        if (*encode) {
            return cmd_encode(enc_input, enc_header, enc_exclude, enc_yes, enc_no, enc_undecided, enc_pattern,
                              enc_out, out);
        }
        if (*fit) {
            const auto data = load_input(fit_in);
            const ModelSpec spec{fit_g, fit_d, fit_common ? SlopeMode::Common : SlopeMode::Free};
            spec.validate();
            const auto ms = multi_start_fit(data, spec, fit_ctl.control());
            for (const auto& f : ms.failures) err << "mlta: " << f << '\n';
            auto file = open_out(fit_out);
            write_fit_report(file, ms.best.params, ms.best.report, variable_names(data));
            print_fit(out, ms.best.report);
            return kExitOk;
        }
        if (*select) {
            const auto data = load_input(sel_in);
            std::vector<SlopeMode> modes;
            for (const auto& m : split_list(sel_modes)) modes.push_back(slope_mode_from_string(m));
            const auto grid =
                grid_search(data, parse_int_list(sel_g), parse_int_list(sel_d), modes, sel_ctl.control());
            auto file = open_out(sel_out);
            write_grid_csv(file, grid);
            if (!sel_json.empty()) {
                auto js = open_out(sel_json);
                write_grid_json(js, grid);
            }
            if (!sel_tables.empty()) {
                for (const char* c : {"loglik", "bic", "bic_star"}) {
                    auto t = open_out(sel_tables + "_" + c + ".csv");
                    write_grid_table_csv(t, grid, c);
                }
            }
            for (const auto& r : grid.rows) {
                if (r.failed) err << "mlta: " << describe(r.spec) << " failed: " << r.warnings.back() << '\n';
            }
            if (grid.best_by_bic) out << "best by BIC: " << describe(*grid.best_by_bic) << '\n';
            if (grid.best_by_bic_star) out << "best by BIC*: " << describe(*grid.best_by_bic_star) << '\n';
            return kExitOk;
        }
        if (*diag) {
            const auto data = load_input(dia_in);
            auto in = open_in(dia_report);
            const auto rep = read_fit_report(in);
            if (rep.params.n_vars() != static_cast<int>(data.n_vars())) {
                throw ArgumentError("report and data disagree on the number of variables");
            }
            const int q = dia_q > 0 ? dia_q : (rep.report.quadrature_q > 0 ? rep.report.quadrature_q : 5);
            const QuadratureRule rule = rep.params.dim() > 0 ? hermite_grid(q, rep.params.dim()) : QuadratureRule{};
            const double ll = rep.params.dim() > 0 ? gh_loglik(data, rep.params, rule) : lca_form_loglik(data, rep.params);
            const auto d = diagnose(data, rep.params, ll, q, parse_double_list(dia_sspr));
            auto file = open_out(dia_out);
            write_diagnostics_json(file, d);
            if (!dia_lift.empty()) {
                const auto names = rep.variables.empty() ? variable_names(data) : rep.variables;
                for (std::size_t g = 0; g < d.lift.size(); ++g) {
                    auto lf = open_out(dia_lift + "_g" + std::to_string(g + 1) + ".csv");
                    write_labeled_matrix_csv(lf, d.lift[g], names);
                }
            }
            out << "loglik " << ll << ", BIC " << d.bic << ", BIC* " << d.bic_star;
            if (d.chi_sq && d.chi_sq->applicable) {
                out << ", chi-square " << d.chi_sq->statistic << " on " << d.chi_sq->dof << " df, p " << *d.chi_sq->p_value;
            }
            out << '\n';
            return kExitOk;
        }
        if (*sim) {
            auto in = open_in(sim_params);
            MltaParameters params = read_params_json(in);
            if (!sim_eta.empty()) {
                const auto eta = parse_double_list(sim_eta);
                if (static_cast<int>(eta.size()) != params.groups()) {
                    throw ArgumentError("--eta has " + std::to_string(eta.size()) + " entries for " +
                                        std::to_string(params.groups()) + " groups");
                }
                params.eta = Eigen::Map<const Eigen::VectorXd>(eta.data(), static_cast<Eigen::Index>(eta.size()));
                params.validate();
            }
            const auto s = simulate(params, sim_n, sim_seed);
            auto file = open_out(sim_out);
            if (sim_pattern) {
                write_pattern_csv(file, s.data);
            } else {
                write_dense_csv(file, s.data);
            }
            if (!sim_truth.empty()) {
                auto t = open_out(sim_truth);
                t << "group\n";
                for (int g : s.z) t << g + 1 << '\n';
            }
            out << "simulated " << sim_n << " rows\n";
            return kExitOk;
        }
        if (*jack) {
            const auto data = load_input(jk_in);
            auto in = open_in(jk_report);
            const auto rep = read_fit_report(in);
            const FitControl ctrl = jk_ctl.control();
            // Re-converge from the saved estimates to recover the variational state.
            const auto fitted = fit_mlta_from(data, rep.params.spec, ctrl,
                                              warm_start_from(data, rep.params, ctrl.final_quadrature_q));
            JackknifeOptions opt;
            opt.stride = jk_stride;
            opt.max_iter = jk_refit_iter;
            const auto jk = jackknife_se(data, fitted, ctrl, opt);
            auto file = open_out(jk_out);
            write_jackknife_json(file, jk);
            for (const auto& w : jk.warnings) err << "mlta: " << w << '\n';
            out << jk.n_refits << " of " << jk.n_requested << " delete-one refits\n";
            return kExitOk;
        }
    } catch (const AllStartsFailed& e) {
        err << "mlta: " << e.what() << '\n';
        return kExitFitFailed;
    } catch (const DegenerateGroup& e) {
        err << "mlta: " << e.what() << '\n';
        return kExitFitFailed;
    } catch (const std::exception& e) {
        err << "mlta: " << e.what() << '\n';
        return kExitDataError;
    }
    return kExitDataError;
}

}  // namespace mlta::cli

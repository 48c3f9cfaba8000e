#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ebsig/discrete.hpp"
#include "ebsig/ecm.hpp"
#include "ebsig/errors.hpp"
#include "ebsig/plotdata.hpp"
#include "ebsig/posterior.hpp"
#include "ebsig/selection.hpp"
#include "ebsig/serialize.hpp"
#include "ebsig/simulation.hpp"
#include "ebsig/table.hpp"

namespace {

using namespace ebsig;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- fit ---------------------------------------------------------------

struct FitArgs {
    std::string table_path;
    std::string model;
    std::string baseline = "marginal";
    std::string out;
    double alpha = 0.0;
    std::size_t k = 0;
    int dof = 0;
    double penalty = 0.0;
    double tol = 0.0;
    std::size_t max_iter = 0;
    std::uint64_t seed = 0;
};

void require_only_for(const CLI::Option* opt, const std::string& model,
                      const std::string& expected_model, const char* flag) {
    if (opt->count() > 0 && model != expected_model)
        throw UsageError(std::string(flag) + " applies to --model " +
                         expected_model + " only");
}

int run_fit(const FitArgs& args, const CLI::Option* alpha_opt,
            const CLI::Option* k_opt, const CLI::Option* dof_opt,
            const CLI::Option* penalty_opt, const CLI::Option* tol_opt,
            const CLI::Option* iter_opt) {
    require_only_for(alpha_opt, args.model, "general-gamma", "--alpha");
    require_only_for(k_opt, args.model, "k-gamma", "--k");
    require_only_for(dof_opt, args.model, "efron", "--dof");
    require_only_for(penalty_opt, args.model, "efron", "--penalty");
    if (args.model == "general-gamma" && alpha_opt->count() == 0)
        throw UsageError("--model general-gamma requires --alpha");
    if (args.model == "k-gamma" && k_opt->count() == 0)
        throw UsageError("--model k-gamma requires --k");
    if (args.model == "efron" &&
        (dof_opt->count() == 0 || penalty_opt->count() == 0))
        throw UsageError("--model efron requires --dof and --penalty");

    const ContingencyTable table = load_table(args.table_path);
    const ExpectedCounts expected = estimate_null_expected_count(
        table, expected_method_from_name(args.baseline));

    Json artifact;
    bool converged = false;
    std::string summary;
    if (args.model == "KM") {
        KmOptions options;
        if (iter_opt->count() > 0) options.max_iter = static_cast<int>(args.max_iter);
        if (tol_opt->count() > 0) options.tol = args.tol;
        const auto fit = km_fit(table, expected,
                                make_support(table, expected, kKmSupportSize),
                                options);
        converged = fit.converged;
        artifact = fit_to_json(fit, table, expected);
        summary = "log_marginal: " + num(fit.log_marginal) +
                  "\nsupport_size: " + std::to_string(fit.prior.size()) +
                  "\nkkt_residual: " + num(fit.kkt_residual);
    } else if (args.model == "efron") {
        EfronOptions options;
        if (iter_opt->count() > 0) options.max_iter = static_cast<int>(args.max_iter);
        if (tol_opt->count() > 0) options.grad_tol = args.tol;
        const auto fit = efron_fit(
            table, expected, args.dof, args.penalty,
            make_support(table, expected,
                         std::max(kEfronSupportSize, args.dof + 1)),
            options);
        converged = fit.converged;
        artifact = fit_to_json(fit, table, expected);
        summary = "log_marginal: " + num(fit.log_marginal);
        if (artifact.contains("aic"))
            summary += "\nedf: " + num(artifact["edf"].get<double>()) +
                       "\nAIC: " + num(artifact["aic"].get<double>());
    } else {
        EcmOptions options;
        options.seed = args.seed;
        if (iter_opt->count() > 0) options.max_iter = args.max_iter;
        if (tol_opt->count() > 0) options.tol = args.tol;
        FitResult fit;
        if (args.model == "GPS") {
            fit = fit_gps(table, expected, options);
        } else if (args.model == "k-gamma") {
            fit = fit_k_gamma(table, expected, args.k, options);
        } else {
            fit = ecm_fit(table, expected, args.alpha,
                          default_component_count(table), options);
        }
        converged = fit.converged;
        artifact = fit_to_json(fit, table, expected);
        summary = "log_marginal: " + num(fit.log_marginal) +
                  "\nK_star: " + std::to_string(fit.K_star) +
                  "\nAIC: " + num(artifact["aic"].get<double>()) +
                  "\nBIC: " + num(artifact["bic"].get<double>());
    }

    write_json_atomic(args.out, artifact);
    std::cout << "model: " << artifact["model"].get<std::string>() << "\n"
              << "converged: " << (converged ? "yes" : "no") << " ("
              << artifact["iterations"].get<std::size_t>() << " iterations)\n"
              << summary << "\nwrote: " << args.out << "\n";
    if (!converged) {
        std::cerr << "error: fit did not converge; artifact written for "
                     "inspection\n";
        return 4;
    }
    return 0;
}

// --- tune --------------------------------------------------------------

struct TuneArgs {
    std::string table_path;
    std::string model = "general-gamma";
    std::string baseline = "marginal";
    std::string criterion = "AIC";
    std::string out;
    std::string report_csv;
    std::string report_json;
    std::vector<double> alphas;
    std::vector<int> dofs;
    std::vector<double> penalties;
    std::uint64_t seed = 0;
};

int run_tune(const TuneArgs& args, const CLI::Option* alphas_opt,
             const CLI::Option* dofs_opt, const CLI::Option* penalties_opt) {
    require_only_for(alphas_opt, args.model, "general-gamma", "--alphas");
    require_only_for(dofs_opt, args.model, "efron", "--dofs");
    require_only_for(penalties_opt, args.model, "efron", "--penalties");
    const Criterion criterion =
        args.criterion == "BIC" ? Criterion::bic : Criterion::aic;

    const ContingencyTable table = load_table(args.table_path);
    const ExpectedCounts expected = estimate_null_expected_count(
        table, expected_method_from_name(args.baseline));

    TuneReport report;
    Json best;
    if (args.model == "general-gamma") {
        std::vector<double> grid = args.alphas;
        if (grid.empty())
            grid.assign(kDefaultAlphaGrid.begin(), kDefaultAlphaGrid.end());
        EcmOptions options;
        options.seed = args.seed;
        auto result = tune_general_gamma(table, expected, grid, criterion, options);
        report = std::move(result.report);
        best = fit_to_json(result.best, table, expected);
    } else {
        std::vector<int> dofs = args.dofs;
        if (dofs.empty())
            dofs.assign(kDefaultEfronDofGrid.begin(), kDefaultEfronDofGrid.end());
        std::vector<double> penalties = args.penalties;
        if (penalties.empty())
            penalties.assign(kDefaultEfronPenaltyGrid.begin(),
                             kDefaultEfronPenaltyGrid.end());
        auto result = tune_efron(table, expected, dofs, penalties, criterion);
        report = std::move(result.report);
        best = fit_to_json(result.best, table, expected);
    }

    std::cout << report.table();
    const TuneRow& selected = report.rows[criterion == Criterion::bic
                                              ? report.selected_by_bic
                                              : report.selected_by_aic];
    std::cout << "selected by " << args.criterion << ": "
              << (report.model == "general_gamma"
                      ? "alpha = " + num(selected.alpha)
                      : "p = " + std::to_string(selected.dof) +
                            ", c0 = " + num(selected.penalty))
              << "\n";
    if (!args.out.empty()) {
        write_json_atomic(args.out, best);
        std::cout << "wrote: " << args.out << "\n";
    }
    if (!args.report_csv.empty()) {
        write_text_atomic(args.report_csv, report.csv());
        std::cout << "wrote: " << args.report_csv << "\n";
    }
    if (!args.report_json.empty()) {
        write_json_atomic(args.report_json, tune_report_to_json(report));
        std::cout << "wrote: " << args.report_json << "\n";
    }
    return 0;
}

// --- detect ------------------------------------------------------------

struct DetectArgs {
    std::string fit_path;
    std::string out;
    std::string json_out;
    double cutoff = kDefaultDetectionCutoff;
    double threshold = kDefaultDetectionProb;
};

int run_detect(const DetectArgs& args) {
    if (!(args.cutoff > 1.0))
        throw UsageError("signal cutoff must exceed 1");
    if (!(args.threshold > 0.0 && args.threshold < 1.0))
        throw UsageError("probability threshold must lie in (0, 1)");
    const LoadedFit fit = load_fit(args.fit_path);
    const DetectionResult detection = fit.detect(args.cutoff, args.threshold);
    if (!args.out.empty())
        write_text_atomic(args.out, detection_csv(detection, fit.table));
    if (!args.json_out.empty())
        write_json_atomic(args.json_out, detection_to_json(detection, fit.table));
    std::cout << detection.count() << "\n";
    return 0;
}

// --- summarize ---------------------------------------------------------

struct SummarizeArgs {
    std::string fit_path;
    std::string stat = "median";
    std::string out;
    std::string json_out;
    double level = 0.90;
};

int run_summarize(const SummarizeArgs& args) {
    if (!(args.level > 0.0 && args.level < 1.0))
        throw UsageError("credible level must lie in (0, 1)");
    const LoadedFit fit = load_fit(args.fit_path);
    const PosteriorSummary summary = fit.summarize(args.level);
    const Grid<double>& stat = args.stat == "lower"   ? summary.lower
                               : args.stat == "upper" ? summary.upper
                                                      : summary.median;
    const std::string csv = matrix_csv(stat, fit.table);
    if (!args.out.empty()) {
        write_text_atomic(args.out, csv);
        std::cout << "wrote: " << args.out << "\n";
    }
    if (!args.json_out.empty()) {
        write_json_atomic(args.json_out, summary_to_json(summary, fit.table));
        std::cout << "wrote: " << args.json_out << "\n";
    }
    if (args.out.empty() && args.json_out.empty()) std::cout << csv;
    return 0;
}

// --- plot-data ---------------------------------------------------------

struct PlotArgs {
    std::string fit_path;
    std::string type;
    std::string out;
    std::string svg_out;
    PlotOptions options;
};

int run_plot_data(const PlotArgs& args) {
    const LoadedFit fit = load_fit(args.fit_path);
    const std::size_t available = fit.table.n_rows() - 1;
    if (static_cast<std::size_t>(args.options.num_top_aes) > available)
        std::cerr << "warning: requested " << args.options.num_top_aes
                  << " top AEs but only " << available
                  << " are available; clamping\n";
    const Json plot = args.type == "heatmap" ? heatmap_data(fit, args.options)
                                             : eyeplot_data(fit, args.options);
    write_json_atomic(args.out, plot);
    std::cout << "cells: " << plot["cells"].size() << "\nwrote: " << args.out
              << "\n";
    if (!args.svg_out.empty()) {
        write_text_atomic(args.svg_out, plot_svg(plot));
        std::cout << "wrote: " << args.svg_out << "\n";
    }
    return 0;
}

// --- simulate ----------------------------------------------------------

struct SimulateArgs {
    std::string config_path;
    std::string table_path;
    std::string baseline = "marginal";
    std::string out;
    std::string draws_out;
    std::vector<std::string> signal_cells;
    std::vector<double> lambdas;
    std::vector<double> zis;
    std::vector<double> alphas;
    std::vector<std::string> policies;
    std::size_t n_sim = 0;
    std::size_t draws = 0;
    std::uint64_t seed = 0;
};

std::pair<std::size_t, std::size_t> parse_cell(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma != std::string::npos) {
            std::size_t ui = 0, uj = 0;
            const unsigned long i = std::stoul(text.substr(0, comma), &ui);
            const std::string rest = text.substr(comma + 1);
            const unsigned long j = std::stoul(rest, &uj);
            if (ui == comma && uj == rest.size()) return {i, j};
        }
    } catch (const std::exception&) {
    }
    throw UsageError("signal cell '" + text + "' must look like <row>,<col>");
}

StudyConfig config_from_json(const Json& j, std::string& table_path) {
    StudyConfig config;
    const auto it = j.find("ref_table");
    if (it == j.end() || !it->is_string())
        throw DataError("simulation config needs a 'ref_table' path");
    table_path = it->get<std::string>();
    if (j.contains("signal_cells")) {
        config.signal_cells.clear();
        for (const auto& cell : j["signal_cells"]) {
            if (!cell.is_array() || cell.size() != 2)
                throw DataError("signal_cells entries must be [row, col] pairs");
            config.signal_cells.emplace_back(cell[0].get<std::size_t>(),
                                             cell[1].get<std::size_t>());
        }
    }
    if (j.contains("lambda_grid"))
        config.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
    if (j.contains("zi_grid"))
        config.zi_grid = j["zi_grid"].get<std::vector<double>>();
    if (j.contains("alpha_grid"))
        config.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
    if (j.contains("policies"))
        config.policies = j["policies"].get<std::vector<std::string>>();
    if (j.contains("n_sim")) config.n_sim = j["n_sim"].get<std::size_t>();
    if (j.contains("draw_count"))
        config.draw_count = j["draw_count"].get<std::size_t>();
    if (j.contains("baseline"))
        config.expected = expected_method_from_name(j["baseline"].get<std::string>());
    if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
    return config;
}

std::string records_csv(const std::vector<StudyRecord>& records) {
    std::string csv = "policy,zi,lambda,metric_name,value\n";
    for (const StudyRecord& rec : records)
        csv += rec.policy + ',' + num(rec.zi) + ',' + num(rec.lambda) + ',' +
               rec.metric_name + ',' + full(rec.value) + '\n';
    return csv;
}

std::string captured_csv(const std::vector<CapturedCellDraws>& captured) {
    std::string csv =
        "policy,zi,lambda,replicate,ae_index,drug_index,draw_index,value\n";
    for (const CapturedCellDraws& cell : captured) {
        const std::string prefix = cell.policy + ',' + num(cell.zi) + ',' +
                                   num(cell.lambda) + ',' +
                                   std::to_string(cell.replicate) + ',' +
                                   std::to_string(cell.i) + ',' +
                                   std::to_string(cell.j) + ',';
        for (std::size_t s = 0; s < cell.draws.size(); ++s)
            csv += prefix + std::to_string(s) + ',' + full(cell.draws[s]) + '\n';
    }
    return csv;
}

int run_simulate(const SimulateArgs& args, const CLI::Option* seed_opt) {
    std::string table_path;
    StudyConfig config;
    if (!args.config_path.empty()) {
        config = config_from_json(read_json_file(args.config_path), table_path);
    } else {
        if (args.table_path.empty())
            throw UsageError("simulate needs --config or --table");
        table_path = args.table_path;
        config.signal_cells = {{0, 0}, {6, 0}, {8, 0}};
        config.lambda_grid = {2.0};
        config.zi_grid = {0.0};
        config.expected = expected_method_from_name(args.baseline);
    }
    if (!args.signal_cells.empty()) {
        config.signal_cells.clear();
        for (const std::string& text : args.signal_cells)
            config.signal_cells.push_back(parse_cell(text));
    }
    if (!args.lambdas.empty()) config.lambda_grid = args.lambdas;
    if (!args.zis.empty()) config.zi_grid = args.zis;
    if (!args.alphas.empty()) config.alpha_grid = args.alphas;
    if (!args.policies.empty()) config.policies = args.policies;
    if (args.n_sim > 0) config.n_sim = args.n_sim;
    if (args.draws > 0) config.draw_count = args.draws;
    if (seed_opt->count() > 0 || args.config_path.empty()) config.seed = args.seed;

    const ContingencyTable table = load_table(table_path);
    std::vector<CapturedCellDraws> captured;
    const auto records = run_simulation_study(
        table, config, args.draws_out.empty() ? nullptr : &captured);
    write_text_atomic(args.out, records_csv(records));
    std::cout << "records: " << records.size() << "\nwrote: " << args.out << "\n";
    if (!args.draws_out.empty()) {
        write_text_atomic(args.draws_out, captured_csv(captured));
        std::cout << "wrote: " << args.draws_out << "\n";
    }
    return 0;
}

// --- generate ----------------------------------------------------------

struct GenerateArgs {
    std::string table_path;
    std::string baseline = "marginal";
    std::string out_dir;
    std::string prefix = "sim_table";
    std::vector<std::string> signals;
    std::size_t n_tables = 1;
    double zi = 0.0;
    double omega = 0.0;
    std::uint64_t seed = 0;
};

int run_generate(const GenerateArgs& args, const CLI::Option* zi_opt,
                 const CLI::Option* omega_opt) {
    if (zi_opt->count() > 0 && omega_opt->count() > 0)
        throw UsageError("--zi and --omega are mutually exclusive");
    const ContingencyTable table = load_table(args.table_path);

    SignalMatrix signal = uniform_signal(table.n_rows(), table.n_cols());
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (const std::string& text : args.signals) {
        const auto second = text.rfind(',');
        const auto first = second == std::string::npos
                               ? std::string::npos
                               : text.rfind(',', second - 1);
        if (first == std::string::npos || first == 0 || second <= first + 1)
            throw UsageError("signal '" + text +
                             "' must look like <row>,<col>,<strength>");
        const auto [i, j] = parse_cell(text.substr(0, second));
        double strength = 0.0;
        try {
            std::size_t used = 0;
            const std::string tail = text.substr(second + 1);
            strength = std::stod(tail, &used);
            if (used != tail.size()) throw UsageError("");
        } catch (const std::exception&) {
            throw UsageError("signal '" + text + "' has a malformed strength");
        }
        if (i >= table.n_rows() || j >= table.n_cols())
            throw UsageError("signal cell outside the table");
        signal.values(i, j) = strength;
        cells.emplace_back(i, j);
    }

    ZeroIndicator zeros;
    zeros.z = Grid<std::uint8_t>(table.n_rows(), table.n_cols(), 0);
    if (zi_opt->count() > 0) {
        const ExpectedCounts expected = estimate_null_expected_count(
            table, expected_method_from_name(args.baseline));
        zeros = zero_indicator_from_E(expected, args.zi);
    } else if (omega_opt->count() > 0) {
        zeros = zero_indicator_bernoulli(table.n_rows(), table.n_cols(),
                                         args.omega, args.seed);
    }
    for (const auto& [i, j] : cells) zeros.z(i, j) = 0;

    const auto tables =
        generate_contin_table(table, signal, zeros, args.n_tables, args.seed);
    std::filesystem::create_directories(args.out_dir);
    for (std::size_t t = 0; t < tables.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "%s_%04zu.csv", args.prefix.c_str(), t);
        write_text_atomic((std::filesystem::path(args.out_dir) / name).string(),
                          table_csv(tables[t]));
    }
    std::cout << "wrote " << tables.size() << " tables to " << args.out_dir
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Empirical-Bayes signal detection for report-count tables"};
    app.require_subcommand(1);
    int rc = 0;

    FitArgs fit_args;
    auto* fit = app.add_subcommand("fit", "Fit one model and write a fit file");
    fit->add_option("--table", fit_args.table_path, "Report-count CSV")->required();
    fit->add_option("--model", fit_args.model, "Model family")
        ->required()
        ->check(CLI::IsMember({"GPS", "k-gamma", "general-gamma", "KM", "efron"}));
    auto* alpha_opt =
        fit->add_option("--alpha", fit_args.alpha, "Shrinkage weight in [0, 1]");
    auto* k_opt = fit->add_option("--k", fit_args.k, "Mixture size");
    auto* dof_opt = fit->add_option("--dof", fit_args.dof, "Spline rank p");
    auto* penalty_opt =
        fit->add_option("--penalty", fit_args.penalty, "Coefficient penalty c0");
    fit->add_option("--baseline", fit_args.baseline, "Null expected-count method")
        ->check(CLI::IsMember({"marginal", "subtable"}));
    auto* fit_tol = fit->add_option("--tol", fit_args.tol, "Convergence tolerance");
    auto* fit_iter =
        fit->add_option("--max-iter", fit_args.max_iter, "Iteration cap");
    fit->add_option("--seed", fit_args.seed, "RNG seed")->envname("EBSIG_SEED");
    fit->add_option("--out", fit_args.out, "Fit file path")->required();
    fit->callback([&] {
        rc = run_fit(fit_args, alpha_opt, k_opt, dof_opt, penalty_opt, fit_tol,
                     fit_iter);
    });

    TuneArgs tune_args;
    auto* tune =
        app.add_subcommand("tune", "Grid-search hyperparameters, keep the best fit");
    tune->add_option("--table", tune_args.table_path, "Report-count CSV")->required();
    tune->add_option("--model", tune_args.model, "Model family")
        ->check(CLI::IsMember({"general-gamma", "efron"}));
    auto* alphas_opt = tune->add_option("--alphas", tune_args.alphas,
                                        "Shrinkage grid (comma separated)")
                           ->delimiter(',');
    auto* dofs_opt =
        tune->add_option("--dofs", tune_args.dofs, "Spline rank grid")->delimiter(',');
    auto* penalties_opt =
        tune->add_option("--penalties", tune_args.penalties, "Penalty grid")
            ->delimiter(',');
    tune->add_option("--criterion", tune_args.criterion, "Selection criterion")
        ->check(CLI::IsMember({"AIC", "BIC"}));
    tune->add_option("--baseline", tune_args.baseline, "Null expected-count method")
        ->check(CLI::IsMember({"marginal", "subtable"}));
    tune->add_option("--seed", tune_args.seed, "RNG seed")->envname("EBSIG_SEED");
    tune->add_option("--out", tune_args.out, "Best-fit file path");
    tune->add_option("--report", tune_args.report_csv, "Grid report CSV path");
    tune->add_option("--report-json", tune_args.report_json, "Grid report JSON path");
    tune->callback(
        [&] { rc = run_tune(tune_args, alphas_opt, dofs_opt, penalties_opt); });

    DetectArgs detect_args;
    auto* detect = app.add_subcommand("detect", "Flag signal cells from a fit file");
    detect->add_option("--fit", detect_args.fit_path, "Fit file")->required();
    detect->add_option("--cutoff", detect_args.cutoff, "Signal strength cutoff");
    detect->add_option("--threshold", detect_args.threshold,
                       "Posterior probability threshold");
    detect->add_option("--out", detect_args.out, "Detection matrix CSV path");
    detect->add_option("--json", detect_args.json_out, "Detection JSON path");
    detect->callback([&] { rc = run_detect(detect_args); });

    SummarizeArgs summarize_args;
    auto* summarize =
        app.add_subcommand("summarize", "Posterior medians and credible bounds");
    summarize->add_option("--fit", summarize_args.fit_path, "Fit file")->required();
    summarize->add_option("--level", summarize_args.level, "Credible mass");
    summarize->add_option("--stat", summarize_args.stat, "Matrix to print")
        ->check(CLI::IsMember({"median", "lower", "upper"}));
    summarize->add_option("--out", summarize_args.out, "Matrix CSV path");
    summarize->add_option("--json", summarize_args.json_out, "Summary JSON path");
    summarize->callback([&] { rc = run_summarize(summarize_args); });

    PlotArgs plot_args;
    auto* plot = app.add_subcommand("plot-data", "Emit plot payloads from a fit file");
    plot->add_option("--fit", plot_args.fit_path, "Fit file")->required();
    plot->add_option("--type", plot_args.type, "Payload flavor")
        ->required()
        ->check(CLI::IsMember({"heatmap", "eyeplot"}));
    plot->add_option("--num-top-aes", plot_args.options.num_top_aes,
                     "AE rows to keep");
    plot->add_option("--n-threshold", plot_args.options.n_threshold,
                     "Eyeplot: drop cells with N below this");
    plot->add_flag("--log-scale", plot_args.options.log_scale,
                   "Eyeplot: log-scale rendering");
    plot->add_option("--cutoff", plot_args.options.cutoff, "Signal strength cutoff");
    plot->add_option("--prob", plot_args.options.prob,
                     "Posterior probability threshold");
    plot->add_option("--level", plot_args.options.level, "Credible mass");
    plot->add_option("--text-shift", plot_args.options.text_shift,
                     "Renderer label offset (opaque)");
    plot->add_option("--text-size", plot_args.options.text_size,
                     "Renderer label size (opaque)");
    plot->add_option("--x-lim-scalar", plot_args.options.x_lim_scalar,
                     "Renderer x-range factor (opaque)");
    plot->add_option("--out", plot_args.out, "Payload JSON path")->required();
    plot->add_option("--svg", plot_args.svg_out, "Static SVG path");
    plot->callback([&] { rc = run_plot_data(plot_args); });

    SimulateArgs sim_args;
    auto* simulate =
        app.add_subcommand("simulate", "Replicate study of fitting policies");
    auto* sim_config =
        simulate->add_option("--config", sim_args.config_path, "Study config JSON");
    simulate->add_option("--table", sim_args.table_path, "Reference table CSV")
        ->excludes(sim_config);
    simulate->add_option("--signal-cell", sim_args.signal_cells,
                         "Signal cell as <row>,<col> (repeatable)");
    simulate->add_option("--lambda", sim_args.lambdas,
                         "True signal strength (repeatable)");
    simulate->add_option("--zi", sim_args.zis,
                         "Zero-inflation quantile (repeatable)");
    simulate->add_option("--alphas", sim_args.alphas, "Tuning grid")->delimiter(',');
    simulate->add_option("--policies", sim_args.policies, "Fitting policies")
        ->delimiter(',');
    simulate->add_option("--n-sim", sim_args.n_sim, "Replicates per configuration");
    simulate->add_option("--draws", sim_args.draws, "Posterior draws per cell");
    simulate->add_option("--baseline", sim_args.baseline,
                         "Null expected-count method")
        ->check(CLI::IsMember({"marginal", "subtable"}));
    auto* sim_seed = simulate->add_option("--seed", sim_args.seed, "RNG seed")
                         ->envname("EBSIG_SEED");
    simulate->add_option("--out", sim_args.out, "Tidy metrics CSV path")->required();
    simulate->add_option("--draws-out", sim_args.draws_out,
                         "Signal-cell draw dump CSV path");
    simulate->callback([&] { rc = run_simulate(sim_args, sim_seed); });

    GenerateArgs gen_args;
    auto* generate =
        app.add_subcommand("generate", "Sample synthetic tables from a reference");
    generate->add_option("--table", gen_args.table_path, "Reference table CSV")
        ->required();
    generate->add_option("--n-tables", gen_args.n_tables, "Tables to sample");
    auto* gen_zi = generate->add_option("--zi", gen_args.zi,
                                        "Zero-inflation quantile of expected counts");
    auto* gen_omega = generate->add_option(
        "--omega", gen_args.omega, "Independent structural-zero probability");
    generate->add_option("--signal", gen_args.signals,
                         "Signal as <row>,<col>,<strength> (repeatable)");
    generate->add_option("--baseline", gen_args.baseline,
                         "Null expected-count method")
        ->check(CLI::IsMember({"marginal", "subtable"}));
    generate->add_option("--seed", gen_args.seed, "RNG seed")->envname("EBSIG_SEED");
    generate->add_option("--out-dir", gen_args.out_dir, "Output directory")
        ->required();
    generate->add_option("--prefix", gen_args.prefix, "Output file prefix");
    generate->callback([&] { rc = run_generate(gen_args, gen_zi, gen_omega); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return rc;
}

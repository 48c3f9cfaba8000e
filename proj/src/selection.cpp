#include "ebsig/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <utility>

#include "ebsig/errors.hpp"

namespace ebsig {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void check_gamma_fit(const FitResult& fit) {
    if (fit.model != "gps" && fit.model != "k_gamma" && fit.model != "general_gamma")
        throw UsageError("information criteria expect a gamma-mixture fit, got model '" +
                         fit.model + "'");
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt_int(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", v);
    return buf;
}

// Numbered rows, right-aligned columns, single-space separators: the
// layout a data frame prints with.
std::string aligned_table(const std::vector<std::string>& headers,
                          const std::vector<std::vector<std::string>>& cells) {
    const std::size_t cols = headers.size();
    std::vector<std::size_t> width(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        width[j] = headers[j].size();
        for (const auto& row : cells) width[j] = std::max(width[j], row[j].size());
    }
    const std::size_t label_width = fmt_int(static_cast<long long>(cells.size())).size();
    std::string out(label_width, ' ');
    for (std::size_t j = 0; j < cols; ++j) {
        out += ' ';
        out.append(width[j] - headers[j].size(), ' ');
        out += headers[j];
    }
    out += '\n';
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::string label = fmt_int(static_cast<long long>(i) + 1);
        label.append(label_width - label.size(), ' ');
        out += label;
        for (std::size_t j = 0; j < cols; ++j) {
            out += ' ';
            out.append(width[j] - cells[i][j].size(), ' ');
            out += cells[i][j];
        }
        out += '\n';
    }
    return out;
}

// Argmin of one criterion over usable rows; rows.size() when none qualify.
std::size_t select_row(const std::vector<TuneRow>& rows, Criterion criterion) {
    std::size_t best = rows.size();
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].converged) continue;
        const double value = criterion == Criterion::aic ? rows[i].aic : rows[i].bic;
        if (!std::isfinite(value) || value >= best_value) continue;
        best = i;
        best_value = value;
    }
    return best;
}

void finish_selection(TuneReport& report) {
    report.selected_by_aic = select_row(report.rows, Criterion::aic);
    report.selected_by_bic = select_row(report.rows, Criterion::bic);
    if (report.selected_by_aic == report.rows.size() ||
        report.selected_by_bic == report.rows.size())
        throw NumericalError("no candidate fit converged with a usable criterion:\n" +
                             report.table());
}

}  // namespace

double aic_general_gamma(const FitResult& fit) {
    check_gamma_fit(fit);
    return 6.0 * static_cast<double>(fit.K_star) - 2.0 * fit.log_marginal;
}

double bic_general_gamma(const FitResult& fit, double cell_count) {
    check_gamma_fit(fit);
    if (!std::isfinite(cell_count) || cell_count <= 0.0)
        throw UsageError("cell count for the complexity criterion must be positive");
    return 3.0 * static_cast<double>(fit.K_star) * std::log(cell_count) -
           2.0 * fit.log_marginal;
}

double bic_general_gamma(const FitResult& fit, const ContingencyTable& table) {
    return bic_general_gamma(
        fit, static_cast<double>(table.n_rows()) * static_cast<double>(table.n_cols()));
}

std::string TuneReport::table() const {
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    if (model == "general_gamma") {
        for (const auto& r : rows)
            cells.push_back({fmt("%.1f", r.alpha), fmt("%.3f", r.aic),
                             fmt("%.3f", r.bic),
                             fmt_int(static_cast<long long>(r.complexity))});
        return aligned_table({"alpha", "AIC", "BIC", "num_mixture"}, cells);
    }
    for (const auto& r : rows)
        cells.push_back({fmt_int(r.dof), fmt("%g", r.penalty), fmt("%.3f", r.aic),
                         fmt("%.3f", r.bic), fmt("%.3f", r.complexity)});
    return aligned_table({"p", "c0", "AIC", "BIC", "edf"}, cells);
}

std::string TuneReport::csv() const {
    const bool gamma = model == "general_gamma";
    std::string out = gamma ? "alpha,aic,bic,num_mixture,log_marginal,converged\n"
                            : "dof,penalty,aic,bic,edf,log_marginal,converged\n";
    for (const auto& r : rows) {
        if (gamma)
            out += fmt("%.17g", r.alpha) + "," + fmt("%.17g", r.aic) + "," +
                   fmt("%.17g", r.bic) + "," +
                   fmt_int(static_cast<long long>(r.complexity));
        else
            out += fmt_int(r.dof) + "," + fmt("%.17g", r.penalty) + "," +
                   fmt("%.17g", r.aic) + "," + fmt("%.17g", r.bic) + "," +
                   fmt("%.17g", r.complexity);
        out += "," + fmt("%.17g", r.log_marginal) + "," +
               (r.converged ? "true" : "false") + "\n";
    }
    return out;
}

GammaTuneResult tune_general_gamma(const ContingencyTable& table,
                                   const ExpectedCounts& E,
                                   std::span<const double> alpha_grid,
                                   Criterion criterion, const EcmOptions& options) {
    if (alpha_grid.empty()) throw UsageError("alpha grid must be nonempty");
    for (double a : alpha_grid)
        if (!std::isfinite(a) || a < 0.0 || a > 1.0)
            throw UsageError("alpha grid values must lie in [0, 1]");

    // One seeded start shared across the grid, so rows differ only in alpha.
    const std::size_t K = default_component_count(table);
    const GammaMixturePrior start =
        init_prior(table, E, K, options.init_eps, options.seed);

    std::vector<std::future<FitResult>> tasks;
    tasks.reserve(alpha_grid.size());
    for (double alpha : alpha_grid)
        tasks.push_back(std::async(std::launch::async, [&, alpha] {
            return ecm_fit_from(table, E, alpha, start, options);
        }));
    std::vector<FitResult> fits;
    fits.reserve(tasks.size());
    for (auto& task : tasks) fits.push_back(task.get());

    const double cells =
        static_cast<double>(table.n_rows()) * static_cast<double>(table.n_cols());
    GammaTuneResult result;
    result.report.model = "general_gamma";
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const FitResult& fit = fits[i];
        TuneRow row;
        row.alpha = alpha_grid[i];
        row.aic = aic_general_gamma(fit);
        row.bic = bic_general_gamma(fit, cells);
        row.complexity = static_cast<double>(fit.K_star);
        row.log_marginal = fit.log_marginal;
        row.converged = fit.converged;
        result.report.rows.push_back(row);
    }
    finish_selection(result.report);
    const std::size_t pick = criterion == Criterion::aic
                                 ? result.report.selected_by_aic
                                 : result.report.selected_by_bic;
    result.best = std::move(fits[pick]);
    return result;
}

int efron_support_size(std::span<const int> dof_grid) {
    if (dof_grid.empty()) throw UsageError("basis-dimension grid must be nonempty");
    int largest = 0;
    for (int p : dof_grid) {
        if (p < 2) throw UsageError("basis dimension must be at least 2");
        largest = std::max(largest, p);
    }
    // The basis needs strictly more support points than columns to keep
    // full rank, so a grid reaching the default size forces one extra.
    return std::max(kEfronSupportSize, largest + 1);
}

EfronTuneResult tune_efron(const ContingencyTable& table, const ExpectedCounts& E,
                           std::span<const int> dof_grid,
                           std::span<const double> penalty_grid,
                           Criterion criterion, const EfronOptions& options) {
    const int support_size = efron_support_size(dof_grid);
    if (penalty_grid.empty()) throw UsageError("penalty grid must be nonempty");
    for (double c0 : penalty_grid)
        if (!std::isfinite(c0) || c0 < 0.0)
            throw UsageError("penalty grid values must be nonnegative");

    const std::vector<double> support = make_support(table, E, support_size);
    std::vector<std::future<EfronFitResult>> tasks;
    tasks.reserve(dof_grid.size() * penalty_grid.size());
    for (int dof : dof_grid)
        for (double penalty : penalty_grid)
            tasks.push_back(std::async(std::launch::async, [&, dof, penalty] {
                return efron_fit(table, E, dof, penalty, support, options);
            }));
    std::vector<EfronFitResult> fits;
    fits.reserve(tasks.size());
    for (auto& task : tasks) fits.push_back(task.get());

    const double cells =
        static_cast<double>(table.n_rows()) * static_cast<double>(table.n_cols());
    EfronTuneResult result;
    result.report.model = "efron";
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const EfronFitResult& fit = fits[i];
        TuneRow row;
        row.dof = dof_grid[i / penalty_grid.size()];
        row.penalty = penalty_grid[i % penalty_grid.size()];
        row.aic = kNan;
        row.bic = kNan;
        row.complexity = kNan;
        row.log_marginal = fit.log_marginal;
        row.converged = fit.converged;
        if (fit.converged) {
            try {
                const double edf = efron_effective_dof(fit, table, E);
                row.complexity = edf;
                row.aic = 2.0 * edf - 2.0 * fit.log_marginal;
                row.bic = edf * std::log(cells) - 2.0 * fit.log_marginal;
            } catch (const NumericalError&) {
                // Indefinite curvature at the optimum: keep the row visible
                // but ineligible.
            }
        }
        result.report.rows.push_back(row);
    }
    finish_selection(result.report);
    const std::size_t pick = criterion == Criterion::aic
                                 ? result.report.selected_by_aic
                                 : result.report.selected_by_bic;
    result.best = std::move(fits[pick]);
    return result;
}

}  // namespace ebsig

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ebsig/discrete.hpp"
#include "ebsig/ecm.hpp"
#include "ebsig/table.hpp"

namespace ebsig {

enum class Criterion { aic, bic };

// Information criteria for gamma-mixture fits. Each retained component
// carries three free parameters (weight, shape, scale), counted literally
// without a simplex correction:
//   AIC = 2 * (3 K*) - 2 logL,   BIC = (3 K*) * log(I*J) - 2 logL.
double aic_general_gamma(const FitResult& fit);
double bic_general_gamma(const FitResult& fit, double cell_count);
double bic_general_gamma(const FitResult& fit, const ContingencyTable& table);

// One hyperparameter-grid evaluation. Slots the model does not use stay
// zero: gamma rows fill alpha, spline rows fill dof and penalty.
// complexity holds the retained component count (gamma) or the effective
// degrees of freedom (spline); criteria are NaN when they could not be
// computed for the row.
struct TuneRow {
    double alpha = 0.0;
    int dof = 0;
    double penalty = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double complexity = 0.0;
    double log_marginal = 0.0;
    bool converged = false;
};

struct TuneReport {
    std::string model;  // "general_gamma" | "efron"
    std::vector<TuneRow> rows;
    // Argmins of each criterion over rows that converged with a finite
    // criterion value; ties keep the earliest row.
    std::size_t selected_by_aic = 0;
    std::size_t selected_by_bic = 0;

    // Aligned data-frame style text table with numbered rows.
    std::string table() const;
    // Machine-readable form, one header line then one line per row.
    std::string csv() const;
};

inline constexpr std::array<double, 6> kDefaultAlphaGrid{0.0, 0.1, 0.3,
                                                         0.5, 0.7, 0.9};
inline constexpr std::array<int, 5> kDefaultEfronDofGrid{40, 60, 80, 100, 120};
inline constexpr std::array<double, 5> kDefaultEfronPenaltyGrid{1e-5, 1e-4, 1e-3,
                                                                1e-2, 1e-1};

struct GammaTuneResult {
    TuneReport report;
    FitResult best;  // fit at the row selected by the requested criterion
};

struct EfronTuneResult {
    TuneReport report;
    EfronFitResult best;
};

// Fits every alpha on the grid from one shared seeded initialization so
// criterion differences reflect alpha rather than initialization noise.
// Grid points run concurrently; the report keeps grid order. Throws
// NumericalError (with the report embedded in the message) when no fit
// converges.
GammaTuneResult tune_general_gamma(const ContingencyTable& table,
                                   const ExpectedCounts& E,
                                   std::span<const double> alpha_grid,
                                   Criterion criterion = Criterion::aic,
                                   const EcmOptions& options = {});

// Support size shared by every fit in an Efron tuning run: the default
// grid size, enlarged when the largest basis dimension needs more support
// points than that to stay full rank.
int efron_support_size(std::span<const int> dof_grid);

// Cartesian-product grid over basis dimension and penalty weight, scored
// by the effective-degrees-of-freedom criteria. Rows whose curvature
// check fails keep NaN criteria and are never selected.
EfronTuneResult tune_efron(const ContingencyTable& table,
                           const ExpectedCounts& E,
                           std::span<const int> dof_grid,
                           std::span<const double> penalty_grid,
                           Criterion criterion = Criterion::aic,
                           const EfronOptions& options = {});

}  // namespace ebsig

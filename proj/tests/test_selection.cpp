#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ebsig/ecm.hpp"
#include "ebsig/errors.hpp"
#include "ebsig/rng.hpp"
#include "ebsig/selection.hpp"

using namespace ebsig;

namespace {

ContingencyTable make_table(std::size_t rows, std::size_t cols,
                            std::vector<std::int64_t> counts) {
    ContingencyTable t;
    for (std::size_t i = 0; i < rows; ++i) t.ae_names.push_back("ae" + std::to_string(i));
    for (std::size_t j = 0; j < cols; ++j) t.drug_names.push_back("drug" + std::to_string(j));
    t.counts = Grid<std::int64_t>(rows, cols, 0);
    std::copy(counts.begin(), counts.end(), t.counts.data());
    t.validate();
    return t;
}

ExpectedCounts const_expected(std::size_t rows, std::size_t cols, double value) {
    ExpectedCounts e;
    e.values = Grid<double>(rows, cols, value);
    return e;
}

// Counts drawn from a three-point relative-risk mixture, as in the
// discrete-model tests, so mixtures of moderate size fit cleanly.
ContingencyTable sampled_table(std::size_t rows, std::size_t cols, double base_rate,
                               std::uint64_t seed) {
    Rng rng(substream_key(seed, 3));
    std::vector<std::int64_t> counts(rows * cols);
    for (auto& c : counts) {
        const double u = rng.next_double();
        const double risk = u < 0.3 ? 0.5 : (u < 0.8 ? 1.0 : 4.0);
        const double lambda = risk * base_rate;
        double p = std::exp(-lambda), cdf = p;
        const double draw = rng.next_double();
        std::int64_t k = 0;
        while (draw > cdf && k < 100000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cdf += p;
        }
        c = k;
    }
    return make_table(rows, cols, std::move(counts));
}

FitResult toy_fit(std::size_t k_star, double log_marginal) {
    FitResult fit;
    fit.model = "general_gamma";
    fit.prior.weights.assign(k_star, 1.0 / static_cast<double>(k_star));
    fit.prior.shapes.assign(k_star, 1.0);
    fit.prior.scales.assign(k_star, 1.0);
    fit.K_star = k_star;
    fit.log_marginal = log_marginal;
    fit.converged = true;
    return fit;
}

}  // namespace

TEST_CASE("aic: one retained component gives 6 - 2 logL exactly") {
    const auto fit = toy_fit(1, -12.75);
    CHECK(aic_general_gamma(fit) == 6.0 - 2.0 * (-12.75));
}

TEST_CASE("bic minus aic equals 3 K* (log cells - 2)") {
    const auto fit = toy_fit(19, -1881.3765);
    const double aic = aic_general_gamma(fit);
    const double bic = bic_general_gamma(fit, 315.0);
    const double gap = 3.0 * 19.0 * (std::log(315.0) - 2.0);
    CHECK(bic - aic == doctest::Approx(gap).epsilon(1e-9));
}

TEST_CASE("bic equals aic when the cell count is e squared") {
    const auto fit = toy_fit(7, -40.5);
    CHECK(bic_general_gamma(fit, std::exp(2.0)) ==
          doctest::Approx(aic_general_gamma(fit)).epsilon(1e-14));
}

TEST_CASE("criteria reject non-gamma fits and bad cell counts") {
    auto fit = toy_fit(2, -5.0);
    fit.model = "km";
    CHECK_THROWS_AS(aic_general_gamma(fit), UsageError);
    CHECK_THROWS_AS(bic_general_gamma(fit, 10.0), UsageError);
    fit.model = "general_gamma";
    CHECK_THROWS_AS(bic_general_gamma(fit, 0.0), UsageError);
    CHECK_THROWS_AS(bic_general_gamma(fit, -3.0), UsageError);
}

TEST_CASE("bic table overload uses the table cell count") {
    const auto fit = toy_fit(3, -20.0);
    const auto t = make_table(3, 4, std::vector<std::int64_t>(12, 2));
    CHECK(bic_general_gamma(fit, t) == bic_general_gamma(fit, 12.0));
}

TEST_CASE("tune_general_gamma: report rows match standalone fits and criteria") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<double> grid{0.1, 0.5, 0.9};
    EcmOptions opts;
    opts.seed = 7;
    const auto tuned = tune_general_gamma(t, e, grid, Criterion::aic, opts);
    REQUIRE(tuned.report.rows.size() == grid.size());
    CHECK(tuned.report.model == "general_gamma");

    // Each row reproduces a standalone fit from the same shared start.
    const auto start = init_prior(t, e, default_component_count(t), opts.init_eps, opts.seed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto fit = ecm_fit_from(t, e, grid[i], start, opts);
        const auto& row = tuned.report.rows[i];
        CHECK(row.alpha == grid[i]);
        CHECK(row.aic == doctest::Approx(aic_general_gamma(fit)).epsilon(1e-12));
        CHECK(row.bic == doctest::Approx(bic_general_gamma(fit, t)).epsilon(1e-12));
        CHECK(row.complexity == static_cast<double>(fit.K_star));
        CHECK(row.log_marginal == doctest::Approx(fit.log_marginal).epsilon(1e-12));
        CHECK(row.converged == fit.converged);
    }
}

TEST_CASE("tune_general_gamma: selected rows are report-scan argmins") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<double> grid{0.0, 0.3, 0.7, 1.0};
    const auto tuned = tune_general_gamma(t, e, grid);

    std::size_t best_aic = 0, best_bic = 0;
    for (std::size_t i = 1; i < tuned.report.rows.size(); ++i) {
        if (!tuned.report.rows[i].converged) continue;
        if (tuned.report.rows[i].aic < tuned.report.rows[best_aic].aic) best_aic = i;
        if (tuned.report.rows[i].bic < tuned.report.rows[best_bic].bic) best_bic = i;
    }
    CHECK(tuned.report.selected_by_aic == best_aic);
    CHECK(tuned.report.selected_by_bic == best_bic);
    CHECK(tuned.best.alpha == grid[best_aic]);
    CHECK(tuned.best.converged);
}

TEST_CASE("tune_general_gamma: requested criterion decides the returned fit") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<double> grid{0.0, 0.3, 0.7};
    const auto by_aic = tune_general_gamma(t, e, grid, Criterion::aic);
    const auto by_bic = tune_general_gamma(t, e, grid, Criterion::bic);
    CHECK(by_aic.report.table() == by_bic.report.table());
    CHECK(by_aic.best.alpha ==
          grid[by_aic.report.selected_by_aic]);
    CHECK(by_bic.best.alpha ==
          grid[by_bic.report.selected_by_bic]);
}

TEST_CASE("tune_general_gamma: single-element grid picks itself") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<double> grid{0.5};
    const auto tuned = tune_general_gamma(t, e, grid);
    CHECK(tuned.report.rows.size() == 1);
    CHECK(tuned.report.selected_by_aic == 0);
    CHECK(tuned.report.selected_by_bic == 0);
    CHECK(tuned.best.alpha == 0.5);
}

TEST_CASE("tune_general_gamma: reruns print identical tables") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<double> grid{0.1, 0.9};
    const auto first = tune_general_gamma(t, e, grid);
    const auto second = tune_general_gamma(t, e, grid);
    CHECK(first.report.table() == second.report.table());
    CHECK(first.report.csv() == second.report.csv());
}

TEST_CASE("tune_general_gamma: grid validation") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    CHECK_THROWS_AS(tune_general_gamma(t, e, std::vector<double>{}), UsageError);
    CHECK_THROWS_AS(tune_general_gamma(t, e, std::vector<double>{0.5, 1.5}), UsageError);
    CHECK_THROWS_AS(tune_general_gamma(t, e, std::vector<double>{-0.1}), UsageError);
}

TEST_CASE("tune_general_gamma: all fits non-converged raises with the report") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    EcmOptions opts;
    opts.max_iter = 1;
    try {
        tune_general_gamma(t, e, std::vector<double>{0.1, 0.5}, Criterion::aic, opts);
        FAIL("expected NumericalError");
    } catch (const NumericalError& err) {
        CHECK(std::string(err.what()).find("alpha") != std::string::npos);
        CHECK(std::string(err.what()).find("num_mixture") != std::string::npos);
    }
}

TEST_CASE("default grids stay pinned") {
    REQUIRE(kDefaultAlphaGrid.size() == 6);
    CHECK(kDefaultAlphaGrid[0] == 0.0);
    CHECK(kDefaultAlphaGrid[2] == 0.3);
    CHECK(kDefaultAlphaGrid[5] == 0.9);
    REQUIRE(kDefaultEfronDofGrid.size() == 5);
    CHECK(kDefaultEfronDofGrid.front() == 40);
    CHECK(kDefaultEfronDofGrid.back() == 120);
    REQUIRE(kDefaultEfronPenaltyGrid.size() == 5);
    CHECK(kDefaultEfronPenaltyGrid.front() == 1e-5);
    CHECK(kDefaultEfronPenaltyGrid.back() == 1e-1);
}

TEST_CASE("efron_support_size: bumps only when the basis needs it") {
    const std::vector<int> small{40, 60};
    CHECK(efron_support_size(small) == kEfronSupportSize);
    const std::vector<int> whole{40, 60, 80, 100, 120};
    CHECK(efron_support_size(whole) == kEfronSupportSize + 1);
    const std::vector<int> huge{150};
    CHECK(efron_support_size(huge) == 151);
    CHECK_THROWS_AS(efron_support_size(std::vector<int>{}), UsageError);
    CHECK_THROWS_AS(efron_support_size(std::vector<int>{1}), UsageError);
}

TEST_CASE("tune_efron: cartesian grid, report-scan argmin, criteria from edf") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<int> dofs{4, 6};
    const std::vector<double> penalties{1e-3, 1e-1};
    const auto tuned = tune_efron(t, e, dofs, penalties);
    REQUIRE(tuned.report.rows.size() == 4);
    CHECK(tuned.report.model == "efron");

    // Row order is dof-major with the penalty cycling fastest.
    CHECK(tuned.report.rows[0].dof == 4);
    CHECK(tuned.report.rows[0].penalty == 1e-3);
    CHECK(tuned.report.rows[1].dof == 4);
    CHECK(tuned.report.rows[1].penalty == 1e-1);
    CHECK(tuned.report.rows[2].dof == 6);
    CHECK(tuned.report.rows[3].penalty == 1e-1);

    const double cells = 30.0;
    std::size_t best_aic = 0, best_bic = 0;
    for (std::size_t i = 0; i < tuned.report.rows.size(); ++i) {
        const auto& row = tuned.report.rows[i];
        REQUIRE(row.converged);
        CHECK(row.complexity > 0.0);
        CHECK(row.complexity <= static_cast<double>(row.dof) + 1e-9);
        CHECK(row.aic == doctest::Approx(2.0 * row.complexity - 2.0 * row.log_marginal)
                             .epsilon(1e-12));
        CHECK(row.bic == doctest::Approx(row.complexity * std::log(cells) -
                                         2.0 * row.log_marginal)
                             .epsilon(1e-12));
        if (row.aic < tuned.report.rows[best_aic].aic) best_aic = i;
        if (row.bic < tuned.report.rows[best_bic].bic) best_bic = i;
    }
    CHECK(tuned.report.selected_by_aic == best_aic);
    CHECK(tuned.report.selected_by_bic == best_bic);
    CHECK(tuned.best.prior.dof() == tuned.report.rows[best_aic].dof);
    CHECK(tuned.best.prior.penalty == tuned.report.rows[best_aic].penalty);
}

TEST_CASE("tune_efron: rows reproduce standalone fits on the shared support") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<int> dofs{5};
    const std::vector<double> penalties{1e-2};
    const auto tuned = tune_efron(t, e, dofs, penalties);
    const auto support = make_support(t, e, efron_support_size(dofs));
    const auto fit = efron_fit(t, e, 5, 1e-2, support);
    CHECK(tuned.report.rows[0].log_marginal ==
          doctest::Approx(fit.log_marginal).epsilon(1e-12));
    CHECK(tuned.report.rows[0].aic ==
          doctest::Approx(efron_aic(fit, t, e)).epsilon(1e-10));
    CHECK(tuned.best.prior.support.size() == support.size());
}

TEST_CASE("tune_efron: one-by-one grid selects itself deterministically") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    const std::vector<int> dofs{4};
    const std::vector<double> penalties{1e-2};
    const auto first = tune_efron(t, e, dofs, penalties);
    const auto second = tune_efron(t, e, dofs, penalties);
    CHECK(first.report.selected_by_aic == 0);
    CHECK(first.report.selected_by_bic == 0);
    CHECK(first.report.table() == second.report.table());
    CHECK(first.report.csv() == second.report.csv());
}

TEST_CASE("tune_efron: grid validation") {
    const auto t = sampled_table(6, 5, 3.0, 91);
    const auto e = const_expected(6, 5, 3.0);
    CHECK_THROWS_AS(tune_efron(t, e, std::vector<int>{4}, std::vector<double>{}),
                    UsageError);
    CHECK_THROWS_AS(tune_efron(t, e, std::vector<int>{4}, std::vector<double>{-1e-3}),
                    UsageError);
}

TEST_CASE("tuning table prints in aligned data-frame style") {
    TuneReport report;
    report.model = "general_gamma";
    const double alphas[] = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
    const double aics[] = {4551.612, 3799.011, 3798.874, 3802.753, 3822.367, 3906.526};
    const double bics[] = {4697.962, 3990.392, 4001.513, 4016.649, 4081.295, 4323.061};
    const double ks[] = {13, 17, 18, 19, 23, 37};
    for (int i = 0; i < 6; ++i) {
        TuneRow row;
        row.alpha = alphas[i];
        row.aic = aics[i];
        row.bic = bics[i];
        row.complexity = ks[i];
        row.converged = true;
        report.rows.push_back(row);
    }
    const std::string expected =
        "  alpha      AIC      BIC num_mixture\n"
        "1   0.0 4551.612 4697.962          13\n"
        "2   0.1 3799.011 3990.392          17\n"
        "3   0.3 3798.874 4001.513          18\n"
        "4   0.5 3802.753 4016.649          19\n"
        "5   0.7 3822.367 4081.295          23\n"
        "6   0.9 3906.526 4323.061          37\n";
    CHECK(report.table() == expected);
}

TEST_CASE("efron tuning table carries the grid and edf columns") {
    TuneReport report;
    report.model = "efron";
    TuneRow row;
    row.dof = 40;
    row.penalty = 1e-5;
    row.aic = 3812.5;
    row.bic = 3920.25;
    row.complexity = 31.875;
    row.converged = true;
    report.rows.push_back(row);
    const std::string text = report.table();
    CHECK(text.find(" p ") != std::string::npos);
    CHECK(text.find("c0") != std::string::npos);
    CHECK(text.find("edf") != std::string::npos);
    CHECK(text.find("40") != std::string::npos);
    CHECK(text.find("1e-05") != std::string::npos);
    CHECK(text.find("31.875") != std::string::npos);
    const std::string csv = report.csv();
    CHECK(csv.find("dof,penalty,aic,bic,edf,log_marginal,converged") == 0);
    CHECK(csv.find("true") != std::string::npos);
}
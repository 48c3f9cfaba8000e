#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <vector>

#include "ebsig/errors.hpp"
#include "ebsig/posterior.hpp"
#include "ebsig/rng.hpp"
#include "ebsig/special.hpp"

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

GammaMixturePrior two_component_prior() {
    GammaMixturePrior prior;
    prior.weights = {0.6, 0.4};
    prior.shapes = {2.0, 5.0};
    prior.scales = {0.5, 0.2};
    return prior;
}

FitResult wrap_fit(GammaMixturePrior prior) {
    FitResult fit;
    fit.prior = std::move(prior);
    fit.model = "k_gamma";
    return fit;
}

DiscreteFitResult wrap_discrete(DiscretePrior prior) {
    DiscreteFitResult fit;
    fit.prior = std::move(prior);
    fit.model = "km";
    fit.converged = true;
    return fit;
}

}  // namespace

TEST_CASE("cell_posterior: single gamma component is exact conjugacy") {
    GammaMixturePrior prior;
    prior.weights = {1.0};
    prior.shapes = {2.5};
    prior.scales = {0.8};
    const auto post = cell_posterior(prior, 7.0, 3.2);
    REQUIRE(post.weights.size() == 1);
    CHECK(post.weights[0] == 1.0);
    CHECK(post.shapes[0] == 2.5 + 7.0);
    CHECK(post.rates[0] == 1.0 / 0.8 + 3.2);
    CHECK_FALSE(post.is_discrete());
    post.validate();
}

TEST_CASE("cell_posterior: discrete masses follow the pmf ratio") {
    DiscretePrior prior{{0.5, 2.0}, {0.5, 0.5}};
    const auto post = cell_posterior(prior, 0.0, 3.0);
    REQUIRE(post.is_discrete());
    // N=0 likelihoods: exp(-0.5*3) and exp(-2*3).
    const double l1 = std::exp(-1.5), l2 = std::exp(-6.0);
    CHECK(post.masses[0] == doctest::Approx(l1 / (l1 + l2)).epsilon(1e-12));
    CHECK(post.masses[1] == doctest::Approx(l2 / (l1 + l2)).epsilon(1e-12));
    CHECK(post.masses[0] + post.masses[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cell_posterior: huge counts dominate the prior") {
    GammaMixturePrior prior;
    prior.weights = {0.5, 0.5};
    prior.shapes = {3.0, 1.0};
    prior.scales = {50.0, 2.0};
    const double count = 1e5, e = 20.0;
    const auto post = cell_posterior(prior, count, e);
    CHECK(std::abs(post.mean() - count / e) / (count / e) < 0.01);

    DiscretePrior grid{{1.0, 10.0, 5000.0, 8000.0}, {0.25, 0.25, 0.25, 0.25}};
    const auto dpost = cell_posterior(grid, count, e);
    CHECK(std::abs(dpost.mean() - 5000.0) / 5000.0 < 0.01);
}

TEST_CASE("cell_posterior: index and shape guards") {
    const auto t = make_table(2, 2, {0, 3, 1, 5});
    const auto e = const_expected(2, 2, 1.5);
    const auto fit = wrap_fit(two_component_prior());
    CHECK_THROWS_AS(cell_posterior(fit, t, e, 2, 0), UsageError);
    CHECK_THROWS_AS(cell_posterior(fit, t, e, 0, 2), UsageError);
    const auto wrong = const_expected(3, 2, 1.5);
    CHECK_THROWS_AS(cell_posterior(fit, t, wrong, 0, 0), DataError);
}

TEST_CASE("posterior_draws: reproducible, finite, and moment-matched") {
    const auto t = make_table(2, 2, {0, 3, 12, 40});
    const auto e = const_expected(2, 2, 4.0);
    const auto fit = wrap_fit(two_component_prior());
    const std::size_t S = 20000;
    const auto draws = posterior_draws(fit, t, e, S, 99);
    CHECK(draws.draw_count == S);
    CHECK(draws.model == "k_gamma");
    REQUIRE(draws.values.size() == S * 4);
    for (double v : draws.values) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
    }
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const auto post = cell_posterior(fit, t, e, i, j);
            double acc = 0.0;
            for (std::size_t s = 0; s < S; ++s) acc += draws.at(s, i, j);
            const double sample_mean = acc / static_cast<double>(S);
            const double se = std::sqrt(post.variance() / static_cast<double>(S));
            CHECK(std::abs(sample_mean - post.mean()) < 3.0 * se);
        }
    }
    const auto again = posterior_draws(fit, t, e, S, 99);
    CHECK(draws.values == again.values);
    const auto other = posterior_draws(fit, t, e, S, 100);
    CHECK(draws.values != other.values);
    CHECK_THROWS_AS(posterior_draws(fit, t, e, 0, 99), UsageError);
}

TEST_CASE("posterior_draws: discrete draws land on the support") {
    const auto t = make_table(2, 2, {0, 3, 12, 40});
    const auto e = const_expected(2, 2, 4.0);
    const auto fit = wrap_discrete({{0.5, 1.0, 3.0, 10.0}, {0.4, 0.3, 0.2, 0.1}});
    const auto draws = posterior_draws(fit, t, e, 500, 7);
    for (double v : draws.values) {
        const bool on_grid = v == 0.5 || v == 1.0 || v == 3.0 || v == 10.0;
        CHECK(on_grid);
    }
}

TEST_CASE("detect_signals: closed-form tails and flags") {
    const auto t = make_table(2, 2, {100, 0, 80, 3});
    ExpectedCounts e;
    e.values = Grid<double>(2, 2, 0.0);
    e.values(0, 0) = 100.0;  // N close to E: no signal
    e.values(0, 1) = 5.0;    // N=0: no signal
    e.values(1, 0) = 4.0;    // O/E = 20: clear signal
    e.values(1, 1) = 3.0;
    GammaMixturePrior prior;
    prior.weights = {1.0};
    prior.shapes = {2.0};
    prior.scales = {1.0};
    const auto fit = wrap_fit(prior);
    const auto det = detect_signals(fit, t, e);
    CHECK(det.cutoff == 1.001);
    CHECK(det.prob == 0.95);
    // Conjugate oracle: tail = SF of Gamma(r+N, 1/h+E) at the cutoff.
    CHECK(det.probability(0, 0) ==
          doctest::Approx(gamma_sf(1.001, 102.0, 101.0)).epsilon(1e-12));
    CHECK(det.detected(0, 0) == 0);
    CHECK(det.detected(0, 1) == 0);
    CHECK(det.detected(1, 0) == 1);
    CHECK(det.probability(1, 0) > 0.999);
    CHECK(det.count() == 1);
    CHECK_THROWS_AS(detect_signals(fit, t, e, 1.0), UsageError);
    CHECK_THROWS_AS(detect_signals(fit, t, e, 1.001, 1.0), UsageError);
}

TEST_CASE("detect_signals: discrete priors use mass above the cutoff") {
    const auto t = make_table(2, 2, {30, 2, 4, 5});
    const auto e = const_expected(2, 2, 5.0);
    const auto fit = wrap_discrete({{0.5, 1.0, 3.0}, {0.3, 0.4, 0.3}});
    const auto det = detect_signals(fit, t, e);
    CHECK(det.detected(0, 0) == 1);  // O/E = 6 concentrates on v=3
    CHECK(det.detected(0, 1) == 0);
    const auto post = cell_posterior(fit, t, e, 0, 0);
    CHECK(det.probability(0, 0) == doctest::Approx(post.masses[2]).epsilon(1e-12));
}

TEST_CASE("detect_signals: tails agree with draw frequencies") {
    const auto t = make_table(2, 2, {0, 3, 12, 40});
    const auto e = const_expected(2, 2, 4.0);
    const auto fit = wrap_fit(two_component_prior());
    const auto det = detect_signals(fit, t, e);
    const std::size_t S = 10000;
    const auto draws = posterior_draws(fit, t, e, S, 31);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            std::size_t hits = 0;
            for (std::size_t s = 0; s < S; ++s)
                if (draws.at(s, i, j) >= det.cutoff) ++hits;
            const double est = static_cast<double>(hits) / static_cast<double>(S);
            const double p = det.probability(i, j);
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) /
                                        static_cast<double>(S));
            CHECK(std::abs(est - p) <= 4.0 * se + 1.0 / static_cast<double>(S));
        }
    }
}

TEST_CASE("posterior_summary: point-mass posterior collapses the interval") {
    const auto t = make_table(2, 2, {3, 1, 4, 1});
    const auto e = const_expected(2, 2, 2.0);
    const auto fit = wrap_discrete({{2.5}, {1.0}});
    const auto summary = posterior_summary(fit, t, e);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(summary.median(i, j) == 2.5);
            CHECK(summary.lower(i, j) == 2.5);
            CHECK(summary.upper(i, j) == 2.5);
        }
}

TEST_CASE("posterior_summary: gamma quantiles match a reference inversion") {
    // Posterior for N=0, E=1 under prior Gamma(4, scale 1) is Gamma(4, rate 2).
    const auto t = make_table(2, 2, {0, 0, 0, 0});
    const auto e = const_expected(2, 2, 1.0);
    GammaMixturePrior prior;
    prior.weights = {1.0};
    prior.shapes = {4.0};
    prior.scales = {1.0};
    const auto fit = wrap_fit(prior);
    const auto summary = posterior_summary(fit, t, e, 0.90);
    const boost::math::gamma_distribution<double> ref(4.0, 0.5);
    CHECK(std::abs(summary.median(0, 0) - boost::math::median(ref)) < 1e-8);
    CHECK(std::abs(summary.lower(0, 0) - boost::math::quantile(ref, 0.05)) < 1e-8);
    CHECK(std::abs(summary.upper(0, 0) - boost::math::quantile(ref, 0.95)) < 1e-8);
    CHECK(summary.median(0, 0) == doctest::Approx(1.8362).epsilon(5e-4));
    CHECK(summary.lower(0, 0) < summary.median(0, 0));
    CHECK(summary.median(0, 0) < summary.upper(0, 0));
    CHECK_THROWS_AS(posterior_summary(fit, t, e, 0.0), UsageError);
    CHECK_THROWS_AS(posterior_summary(fit, t, e, 1.0), UsageError);
}

TEST_CASE("posterior_summary: ordering holds across a mixed fit") {
    const auto t = make_table(3, 3, {0, 2, 9, 1, 5, 0, 7, 3, 25});
    const auto e = const_expected(3, 3, 2.5);
    const auto fit = wrap_fit(two_component_prior());
    const auto summary = posterior_summary(fit, t, e, 0.90);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(summary.lower(i, j) <= summary.median(i, j));
            CHECK(summary.median(i, j) <= summary.upper(i, j));
        }
}

TEST_CASE("scaled_wasserstein: point mass at the reference is zero") {
    CellPosterior post;
    post.support = {2.0};
    post.masses = {1.0};
    CHECK(scaled_wasserstein(post, 2.0, 1) == 0.0);
    CHECK(scaled_wasserstein(post, 2.0, 2) == 0.0);
}

TEST_CASE("scaled_wasserstein: gamma moment formula") {
    CellPosterior post;
    post.weights = {1.0};
    post.shapes = {4.0};
    post.rates = {2.0};
    // mean 2, variance 1, reference 2 -> sqrt(1 + 0)/2.
    CHECK(scaled_wasserstein(post, 2.0, 2) == doctest::Approx(0.5).epsilon(1e-12));
    // Bias lower bound at a shifted reference.
    const double w2 = scaled_wasserstein(post, 1.0, 2);
    CHECK(w2 >= std::abs(post.mean() - 1.0) / 1.0);
    CHECK_THROWS_AS(scaled_wasserstein(post, 0.0, 2), UsageError);
    CHECK_THROWS_AS(scaled_wasserstein(post, 2.0, 3), UsageError);
}

TEST_CASE("scaled_wasserstein: closed forms track Monte Carlo") {
    Rng rng(substream_key(555, 1));
    for (int trial = 0; trial < 20; ++trial) {
        CellPosterior post;
        const std::size_t K = 1 + rng.next_below(3);
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            post.weights.push_back(0.2 + rng.next_double());
            post.shapes.push_back(0.5 + 5.5 * rng.next_double());
            post.rates.push_back(0.5 + 3.5 * rng.next_double());
            total += post.weights[k];
        }
        for (double& w : post.weights) w /= total;
        const double lambda0 = 0.5 + 3.5 * rng.next_double();
        for (int p = 1; p <= 2; ++p) {
            const double closed = scaled_wasserstein(post, lambda0, p);
            const double mc =
                scaled_wasserstein(post, lambda0, p, WassersteinMode::monte_carlo,
                                   100000, 1234 + static_cast<std::uint64_t>(trial));
            CHECK(std::abs(closed - mc) / std::max(1e-8, closed) < 0.01);
            CHECK(closed >= std::abs(post.mean() - lambda0) / lambda0 - 1e-12);
        }
    }
}

TEST_CASE("scaled_wasserstein: discrete absolute-moment sum") {
    CellPosterior post;
    post.support = {0.5, 2.0, 4.0};
    post.masses = {0.25, 0.5, 0.25};
    const double want1 = (0.25 * 1.5 + 0.5 * 0.0 + 0.25 * 2.0) / 2.0;
    CHECK(scaled_wasserstein(post, 2.0, 1) == doctest::Approx(want1).epsilon(1e-12));
    const double mean = post.mean();
    const double want2 =
        std::sqrt(0.25 * 0.5 * 0.5 + 0.5 * 2.0 * 2.0 + 0.25 * 4.0 * 4.0 -
                  mean * mean + (mean - 2.0) * (mean - 2.0)) /
        2.0;
    CHECK(scaled_wasserstein(post, 2.0, 2) == doctest::Approx(want2).epsilon(1e-10));
}

TEST_CASE("draw count default stays pinned") {
    CHECK(kDefaultDrawCount == 10000);
    CHECK(kDefaultDetectionCutoff == 1.001);
    CHECK(kDefaultDetectionProb == 0.95);
}

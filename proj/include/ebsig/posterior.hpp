#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebsig/discrete.hpp"
#include "ebsig/ecm.hpp"
#include "ebsig/rng.hpp"
#include "ebsig/table.hpp"

namespace ebsig {

// Posterior law of one cell's relative-report rate: either a gamma mixture
// (weights/shapes/rates) or a discrete mass function (support/masses).
struct CellPosterior {
    std::vector<double> weights;  // gamma-mixture simplex
    std::vector<double> shapes;   // prior shape + observed count
    std::vector<double> rates;    // prior inverse scale + expected count
    std::vector<double> support;  // discrete grid
    std::vector<double> masses;   // discrete simplex

    bool is_discrete() const { return !support.empty(); }
    void validate() const;

    double mean() const;
    double variance() const;
    double cdf(double x) const;
    // Pr(lambda >= cutoff); inclusive so discrete atoms at the cutoff count.
    double tail_probability(double cutoff) const;
    // Left-continuous generalized inverse of the CDF; gamma mixtures solved
    // by bisection to 1e-10 on a bracket grown geometrically when needed.
    double quantile(double prob) const;
    double draw(Rng& rng) const;
};

CellPosterior cell_posterior(const GammaMixturePrior& prior, double count,
                             double expected);
CellPosterior cell_posterior(const DiscretePrior& prior, double count,
                             double expected);
CellPosterior cell_posterior(const FitResult& fit, const ContingencyTable& table,
                             const ExpectedCounts& expected, std::size_t i,
                             std::size_t j);
CellPosterior cell_posterior(const DiscreteFitResult& fit,
                             const ContingencyTable& table,
                             const ExpectedCounts& expected, std::size_t i,
                             std::size_t j);
CellPosterior cell_posterior(const EfronFitResult& fit,
                             const ContingencyTable& table,
                             const ExpectedCounts& expected, std::size_t i,
                             std::size_t j);

// S draws of lambda for every cell, laid out draw-major: (s, i, j) at
// s*rows*cols + i*cols + j. Each cell consumes its own counter-based
// substream, so the array is independent of evaluation order.
struct PosteriorDraws {
    std::size_t draw_count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint64_t seed = 0;
    std::string model;
    std::vector<double> values;

    double at(std::size_t s, std::size_t i, std::size_t j) const {
        return values[(s * rows + i) * cols + j];
    }
};

inline constexpr std::size_t kDefaultDrawCount = 10000;

PosteriorDraws posterior_draws(const FitResult& fit, const ContingencyTable& table,
                               const ExpectedCounts& expected, std::size_t S,
                               std::uint64_t seed);
PosteriorDraws posterior_draws(const DiscreteFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected, std::size_t S,
                               std::uint64_t seed);
PosteriorDraws posterior_draws(const EfronFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected, std::size_t S,
                               std::uint64_t seed);

// S draws for one cell, on the same substream posterior_draws keys to
// (i, j): equals the (i, j) slice of the full grid for the same seed, so
// callers interested in a few cells can skip materializing the rest.
std::vector<double> posterior_cell_draws(const CellPosterior& posterior,
                                         std::size_t i, std::size_t j,
                                         std::size_t S, std::uint64_t seed);

// Signal flags from closed-form posterior tails: cell (i,j) flagged when
// Pr(lambda_ij >= cutoff | data) > prob. Never consumes draws.
struct DetectionResult {
    Grid<std::uint8_t> detected;
    Grid<double> probability;
    double cutoff = 0.0;
    double prob = 0.0;

    std::size_t count() const;
};

inline constexpr double kDefaultDetectionCutoff = 1.001;
inline constexpr double kDefaultDetectionProb = 0.95;

DetectionResult detect_signals(const FitResult& fit, const ContingencyTable& table,
                               const ExpectedCounts& expected,
                               double cutoff = kDefaultDetectionCutoff,
                               double prob = kDefaultDetectionProb);
DetectionResult detect_signals(const DiscreteFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected,
                               double cutoff = kDefaultDetectionCutoff,
                               double prob = kDefaultDetectionProb);
DetectionResult detect_signals(const EfronFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected,
                               double cutoff = kDefaultDetectionCutoff,
                               double prob = kDefaultDetectionProb);

// Per-cell posterior median and equi-tailed credible interval.
struct PosteriorSummary {
    Grid<double> median;
    Grid<double> lower;
    Grid<double> upper;
    double level = 0.0;
};

PosteriorSummary posterior_summary(const FitResult& fit,
                                   const ContingencyTable& table,
                                   const ExpectedCounts& expected,
                                   double level = 0.90);
PosteriorSummary posterior_summary(const DiscreteFitResult& fit,
                                   const ContingencyTable& table,
                                   const ExpectedCounts& expected,
                                   double level = 0.90);
PosteriorSummary posterior_summary(const EfronFitResult& fit,
                                   const ContingencyTable& table,
                                   const ExpectedCounts& expected,
                                   double level = 0.90);

enum class WassersteinMode { closed_form, monte_carlo };

// (1/lambda0) * (E |lambda - lambda0|^p)^(1/p) for p in {1, 2}. p=2 uses
// mixture moments in closed form; p=1 integrates the CDF (exact sums for
// discrete posteriors); monte_carlo estimates from S seeded draws.
double scaled_wasserstein(const CellPosterior& posterior, double lambda0, int p,
                          WassersteinMode mode = WassersteinMode::closed_form,
                          std::size_t S = kDefaultDrawCount,
                          std::uint64_t seed = 0);

}  // namespace ebsig

#include "ebsig/posterior.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>

#include "ebsig/errors.hpp"
#include "ebsig/special.hpp"

namespace ebsig {
namespace {

constexpr std::uint64_t kDrawTag = 0x64726177;  // cell draw streams
constexpr std::uint64_t kWassTag = 0x77617373;  // distance Monte Carlo stream

void check_simplex(const std::vector<double>& w, const char* what) {
    double total = 0.0;
    for (double x : w) {
        if (!std::isfinite(x) || x < 0.0)
            throw DataError(std::string(what) + " must be finite and nonnegative");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError(std::string(what) + " sum to " + std::to_string(total) +
                        ", expected 1");
}

void softmax_in_place(std::vector<double>& logs, const char* what) {
    double m = -std::numeric_limits<double>::infinity();
    for (double l : logs) m = std::max(m, l);
    if (!std::isfinite(m))
        throw DataError(std::string(what) +
                        ": every component assigns zero likelihood to the cell");
    double total = 0.0;
    for (double& l : logs) {
        l = std::exp(l - m);
        total += l;
    }
    for (double& l : logs) l /= total;
}

void check_cell_inputs(double count, double expected) {
    if (!(count >= 0.0) || !std::isfinite(count))
        throw DataError("cell count must be finite and nonnegative");
    if (!(expected > 0.0) || !std::isfinite(expected))
        throw DataError("cell expected count must be finite and positive");
}

void check_grid_inputs(const ContingencyTable& table,
                       const ExpectedCounts& expected) {
    if (!expected.values.same_shape(table.counts))
        throw DataError("expected counts do not match the table shape");
}

void check_cell_index(const ContingencyTable& table, std::size_t i, std::size_t j) {
    if (i >= table.counts.rows() || j >= table.counts.cols())
        throw UsageError("cell index out of range");
}

}  // namespace

void CellPosterior::validate() const {
    if (is_discrete()) {
        if (!weights.empty() || !shapes.empty() || !rates.empty())
            throw DataError("cell posterior mixes discrete and gamma parameters");
        if (masses.size() != support.size())
            throw DataError("cell posterior: masses and support differ in length");
        for (std::size_t k = 0; k < support.size(); ++k) {
            if (!std::isfinite(support[k]) || support[k] < 0.0)
                throw DataError("cell posterior: support must be finite and nonnegative");
            if (k > 0 && !(support[k] > support[k - 1]))
                throw DataError("cell posterior: support must be strictly increasing");
        }
        check_simplex(masses, "cell posterior masses");
        return;
    }
    if (weights.empty())
        throw DataError("cell posterior has no components");
    if (shapes.size() != weights.size() || rates.size() != weights.size())
        throw DataError("cell posterior: component arrays differ in length");
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(shapes[k] > 0.0) || !std::isfinite(shapes[k]))
            throw DataError("cell posterior: shapes must be positive");
        if (!(rates[k] > 0.0) || !std::isfinite(rates[k]))
            throw DataError("cell posterior: rates must be positive");
    }
    check_simplex(weights, "cell posterior weights");
}

double CellPosterior::mean() const {
    double m = 0.0;
    if (is_discrete()) {
        for (std::size_t k = 0; k < support.size(); ++k) m += masses[k] * support[k];
        return m;
    }
    for (std::size_t k = 0; k < weights.size(); ++k)
        m += weights[k] * shapes[k] / rates[k];
    return m;
}

double CellPosterior::variance() const {
    const double m = mean();
    double second = 0.0;
    if (is_discrete()) {
        for (std::size_t k = 0; k < support.size(); ++k)
            second += masses[k] * support[k] * support[k];
    } else {
        for (std::size_t k = 0; k < weights.size(); ++k)
            second += weights[k] * shapes[k] * (shapes[k] + 1.0) / (rates[k] * rates[k]);
    }
    return std::max(0.0, second - m * m);
}

double CellPosterior::cdf(double x) const {
    if (is_discrete()) {
        double acc = 0.0;
        for (std::size_t k = 0; k < support.size() && support[k] <= x; ++k)
            acc += masses[k];
        return acc;
    }
    if (x <= 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
        if (weights[k] > 0.0) acc += weights[k] * gamma_cdf(x, shapes[k], rates[k]);
    return acc;
}

double CellPosterior::tail_probability(double cutoff) const {
    if (is_discrete()) {
        double acc = 0.0;
        for (std::size_t k = support.size(); k-- > 0 && support[k] >= cutoff;)
            acc += masses[k];
        return acc;
    }
    if (cutoff <= 0.0) return 1.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
        if (weights[k] > 0.0) acc += weights[k] * gamma_sf(cutoff, shapes[k], rates[k]);
    return acc;
}

double CellPosterior::quantile(double prob) const {
    if (!(prob > 0.0 && prob < 1.0))
        throw UsageError("quantile probability must lie strictly inside (0, 1)");
    if (is_discrete()) {
        double acc = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k) {
            acc += masses[k];
            if (acc >= prob) return support[k];
        }
        return support.back();
    }
    double hi = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) continue;
        const double mk = shapes[k] / rates[k];
        hi = std::max(hi, mk + 40.0 * std::sqrt(shapes[k]) / rates[k]);
    }
    hi = std::max(hi, 1e-300);
    for (int grow = 0; cdf(hi) < prob && grow < 200; ++grow) hi *= 2.0;
    double lo = 0.0;
    while (hi - lo > 1e-10 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < prob ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double CellPosterior::draw(Rng& rng) const {
    if (is_discrete()) return support[rng.next_index(masses)];
    const std::size_t k = rng.next_index(weights);
    return rng.next_gamma(shapes[k], rates[k]);
}

CellPosterior cell_posterior(const GammaMixturePrior& prior, double count,
                             double expected) {
    prior.validate();
    check_cell_inputs(count, expected);
    const std::size_t K = prior.size();
    CellPosterior post;
    post.weights.resize(K);
    post.shapes.resize(K);
    post.rates.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        post.weights[k] = std::log(prior.weights[k]) +
                          nb_log_pmf_eh(count, prior.shapes[k], expected,
                                        prior.scales[k]);
        post.shapes[k] = prior.shapes[k] + count;
        post.rates[k] = 1.0 / prior.scales[k] + expected;
    }
    softmax_in_place(post.weights, "gamma posterior");
    return post;
}

CellPosterior cell_posterior(const DiscretePrior& prior, double count,
                             double expected) {
    prior.validate();
    check_cell_inputs(count, expected);
    const std::size_t K = prior.size();
    CellPosterior post;
    post.support = prior.support;
    post.masses.resize(K);
    for (std::size_t k = 0; k < K; ++k)
        post.masses[k] = std::log(prior.masses[k]) +
                         poisson_log_pmf(count, prior.support[k] * expected);
    softmax_in_place(post.masses, "discrete posterior");
    return post;
}

CellPosterior cell_posterior(const FitResult& fit, const ContingencyTable& table,
                             const ExpectedCounts& expected, std::size_t i,
                             std::size_t j) {
    check_grid_inputs(table, expected);
    check_cell_index(table, i, j);
    return cell_posterior(fit.prior, static_cast<double>(table.counts(i, j)),
                          expected.values(i, j));
}

CellPosterior cell_posterior(const DiscreteFitResult& fit,
                             const ContingencyTable& table,
                             const ExpectedCounts& expected, std::size_t i,
                             std::size_t j) {
    check_grid_inputs(table, expected);
    check_cell_index(table, i, j);
    return cell_posterior(fit.prior, static_cast<double>(table.counts(i, j)),
                          expected.values(i, j));
}

CellPosterior cell_posterior(const EfronFitResult& fit,
                             const ContingencyTable& table,
                             const ExpectedCounts& expected, std::size_t i,
                             std::size_t j) {
    check_grid_inputs(table, expected);
    check_cell_index(table, i, j);
    return cell_posterior(fit.prior.as_discrete(),
                          static_cast<double>(table.counts(i, j)),
                          expected.values(i, j));
}

std::vector<double> posterior_cell_draws(const CellPosterior& posterior,
                                         std::size_t i, std::size_t j,
                                         std::size_t S, std::uint64_t seed) {
    if (S < 1) throw UsageError("draw count must be at least 1");
    std::vector<double> out(S);
    Rng rng(substream_key(seed, kDrawTag, i, j));
    if (posterior.is_discrete()) {
        const AliasTable alias(posterior.masses);
        for (std::size_t s = 0; s < S; ++s) out[s] = posterior.support[alias.draw(rng)];
    } else {
        const AliasTable alias(posterior.weights);
        for (std::size_t s = 0; s < S; ++s) {
            const std::size_t k = alias.draw(rng);
            out[s] = rng.next_gamma(posterior.shapes[k], posterior.rates[k]);
        }
    }
    return out;
}

namespace {

template <class Prior>
PosteriorDraws draws_impl(const Prior& prior, const std::string& model,
                          const ContingencyTable& table,
                          const ExpectedCounts& expected, std::size_t S,
                          std::uint64_t seed) {
    if (S < 1) throw UsageError("draw count must be at least 1");
    check_grid_inputs(table, expected);
    const std::size_t rows = table.counts.rows();
    const std::size_t cols = table.counts.cols();
    PosteriorDraws out;
    out.draw_count = S;
    out.rows = rows;
    out.cols = cols;
    out.seed = seed;
    out.model = model;
    out.values.resize(S * rows * cols);
    const std::size_t stride = rows * cols;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const CellPosterior post = cell_posterior(
                prior, static_cast<double>(table.counts(i, j)), expected.values(i, j));
            const std::vector<double> cell = posterior_cell_draws(post, i, j, S, seed);
            const std::size_t base = i * cols + j;
            for (std::size_t s = 0; s < S; ++s) out.values[s * stride + base] = cell[s];
        }
    }
    return out;
}

template <class Prior>
DetectionResult detect_impl(const Prior& prior, const ContingencyTable& table,
                            const ExpectedCounts& expected, double cutoff,
                            double prob) {
    if (!(cutoff > 1.0)) throw UsageError("detection cutoff must exceed 1");
    if (!(prob > 0.0 && prob < 1.0))
        throw UsageError("detection probability must lie strictly inside (0, 1)");
    check_grid_inputs(table, expected);
    const std::size_t rows = table.counts.rows();
    const std::size_t cols = table.counts.cols();
    DetectionResult out;
    out.cutoff = cutoff;
    out.prob = prob;
    out.detected = Grid<std::uint8_t>(rows, cols, 0);
    out.probability = Grid<double>(rows, cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const CellPosterior post = cell_posterior(
                prior, static_cast<double>(table.counts(i, j)), expected.values(i, j));
            const double tail = post.tail_probability(cutoff);
            out.probability(i, j) = tail;
            out.detected(i, j) = tail > prob ? 1 : 0;
        }
    }
    return out;
}

template <class Prior>
PosteriorSummary summary_impl(const Prior& prior, const ContingencyTable& table,
                              const ExpectedCounts& expected, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw UsageError("credible level must lie strictly inside (0, 1)");
    check_grid_inputs(table, expected);
    const std::size_t rows = table.counts.rows();
    const std::size_t cols = table.counts.cols();
    PosteriorSummary out;
    out.level = level;
    out.median = Grid<double>(rows, cols, 0.0);
    out.lower = Grid<double>(rows, cols, 0.0);
    out.upper = Grid<double>(rows, cols, 0.0);
    const double lo_p = (1.0 - level) / 2.0;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const CellPosterior post = cell_posterior(
                prior, static_cast<double>(table.counts(i, j)), expected.values(i, j));
            out.lower(i, j) = post.quantile(lo_p);
            out.median(i, j) = post.quantile(0.5);
            out.upper(i, j) = post.quantile(1.0 - lo_p);
        }
    }
    return out;
}

}  // namespace

std::size_t DetectionResult::count() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < detected.rows(); ++i)
        for (std::size_t j = 0; j < detected.cols(); ++j)
            if (detected(i, j)) ++total;
    return total;
}

PosteriorDraws posterior_draws(const FitResult& fit, const ContingencyTable& table,
                               const ExpectedCounts& expected, std::size_t S,
                               std::uint64_t seed) {
    return draws_impl(fit.prior, fit.model, table, expected, S, seed);
}

PosteriorDraws posterior_draws(const DiscreteFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected, std::size_t S,
                               std::uint64_t seed) {
    return draws_impl(fit.prior, fit.model, table, expected, S, seed);
}

PosteriorDraws posterior_draws(const EfronFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected, std::size_t S,
                               std::uint64_t seed) {
    return draws_impl(fit.prior.as_discrete(), fit.model, table, expected, S, seed);
}

DetectionResult detect_signals(const FitResult& fit, const ContingencyTable& table,
                               const ExpectedCounts& expected, double cutoff,
                               double prob) {
    return detect_impl(fit.prior, table, expected, cutoff, prob);
}

DetectionResult detect_signals(const DiscreteFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected, double cutoff,
                               double prob) {
    return detect_impl(fit.prior, table, expected, cutoff, prob);
}

DetectionResult detect_signals(const EfronFitResult& fit,
                               const ContingencyTable& table,
                               const ExpectedCounts& expected, double cutoff,
                               double prob) {
    return detect_impl(fit.prior.as_discrete(), table, expected, cutoff, prob);
}

PosteriorSummary posterior_summary(const FitResult& fit,
                                   const ContingencyTable& table,
                                   const ExpectedCounts& expected, double level) {
    return summary_impl(fit.prior, table, expected, level);
}

PosteriorSummary posterior_summary(const DiscreteFitResult& fit,
                                   const ContingencyTable& table,
                                   const ExpectedCounts& expected, double level) {
    return summary_impl(fit.prior, table, expected, level);
}

PosteriorSummary posterior_summary(const EfronFitResult& fit,
                                   const ContingencyTable& table,
                                   const ExpectedCounts& expected, double level) {
    return summary_impl(fit.prior.as_discrete(), table, expected, level);
}

double scaled_wasserstein(const CellPosterior& posterior, double lambda0, int p,
                          WassersteinMode mode, std::size_t S,
                          std::uint64_t seed) {
    posterior.validate();
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0))
        throw UsageError("scaled distance requires a positive reference value");
    if (p != 1 && p != 2) throw UsageError("distance order must be 1 or 2");
    if (mode == WassersteinMode::monte_carlo) {
        if (S < 1) throw UsageError("Monte Carlo draw count must be at least 1");
        Rng rng(substream_key(seed, kWassTag));
        double acc = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            const double gap = std::abs(posterior.draw(rng) - lambda0);
            acc += p == 2 ? gap * gap : gap;
        }
        acc /= static_cast<double>(S);
        return (p == 2 ? std::sqrt(acc) : acc) / lambda0;
    }
    if (p == 2) {
        const double m = posterior.mean();
        return std::sqrt(posterior.variance() + (m - lambda0) * (m - lambda0)) /
               lambda0;
    }
    if (posterior.is_discrete()) {
        double acc = 0.0;
        for (std::size_t k = 0; k < posterior.support.size(); ++k)
            acc += posterior.masses[k] * std::abs(posterior.support[k] - lambda0);
        return acc / lambda0;
    }
    // E|X - c| = E(X) - c + 2 * integral_0^c F(t) dt for nonnegative X.
    const auto cdf = [&](double t) { return posterior.cdf(t); };
    const double area =
        boost::math::quadrature::gauss<double, 64>::integrate(cdf, 0.0, lambda0);
    return (posterior.mean() - lambda0 + 2.0 * area) / lambda0;
}

}  // namespace ebsig

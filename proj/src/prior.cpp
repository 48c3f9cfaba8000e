#include "ebsig/prior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ebsig/errors.hpp"
#include "ebsig/rng.hpp"

namespace ebsig {

void GammaMixturePrior::validate() const {
    if (weights.size() != shapes.size() || weights.size() != scales.size())
        throw DataError("mixture prior: component arrays differ in length");
    if (weights.empty()) throw DataError("mixture prior: no components");
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] >= 0.0))
            throw DataError("mixture prior: negative weight at component " +
                            std::to_string(k));
        if (!(shapes[k] > 0.0) || !std::isfinite(shapes[k]))
            throw DataError("mixture prior: shape must be positive at component " +
                            std::to_string(k));
        if (!(scales[k] > 0.0) || !std::isfinite(scales[k]))
            throw DataError("mixture prior: scale must be positive at component " +
                            std::to_string(k));
        total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError("mixture prior: weights sum to " + std::to_string(total) +
                        ", expected 1");
}

GammaMixturePrior init_prior(const ContingencyTable& table,
                             const ExpectedCounts& E, std::size_t K, double eps,
                             std::uint64_t seed) {
    if (K < 1) throw DataError("init_prior: K must be at least 1");
    if (!(eps > 0.0)) throw DataError("init_prior: eps must be positive");
    if (!table.counts.same_shape(E.values))
        throw DataError("init_prior: expected counts do not match the table shape");

    const std::size_t n = table.n_rows() * table.n_cols();
    std::vector<double> ratios(n);
    bool any_positive = false;
    for (std::size_t c = 0; c < n; ++c) {
        ratios[c] = static_cast<double>(table.counts.data()[c]) / E.values.data()[c];
        if (ratios[c] > 0.0) any_positive = true;
    }
    if (!any_positive)
        throw DataError("init_prior: every observed/expected ratio is zero; "
                        "the table has no reports to model");

    Rng rng(substream_key(seed, /*stream=*/0x707269u));  // prior-init stream
    GammaMixturePrior prior;
    prior.weights.assign(K, 1.0 / static_cast<double>(K));
    prior.shapes.resize(K);
    prior.scales.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        double v = ratios[rng.next_below(n)];
        if (v == 0.0) v = 1e-4;
        prior.shapes[k] = v * v / eps;
        prior.scales[k] = eps / v;
    }
    return prior;
}

std::size_t default_component_count(const ContingencyTable& table) {
    return std::min<std::size_t>(200, table.n_rows() * table.n_cols());
}

}  // namespace ebsig

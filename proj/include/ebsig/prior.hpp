#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ebsig/table.hpp"

namespace ebsig {

// Finite gamma mixture over the relative-risk scale: component k is
// Gamma(shape = shapes[k], scale = scales[k]), i.e. rate 1/scales[k],
// mixed with probability weights[k].
struct GammaMixturePrior {
    std::vector<double> weights;
    std::vector<double> shapes;
    std::vector<double> scales;

    std::size_t size() const { return weights.size(); }

    // Throws DataError when the simplex/positivity contract is violated.
    void validate() const;
};

// Mean-variance initialization: draw K support points v with replacement
// from the empirical O/E ratios (seeded), then solve r*h = v, r*h^2 = eps
// per component. Zero ratios are clamped to 1e-4 so every component is a
// proper gamma. Weights start uniform.
GammaMixturePrior init_prior(const ContingencyTable& table,
                             const ExpectedCounts& E, std::size_t K,
                             double eps, std::uint64_t seed);

// Default component count for the richly-parameterized fit.
std::size_t default_component_count(const ContingencyTable& table);

}  // namespace ebsig

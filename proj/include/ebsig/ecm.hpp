#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebsig/prior.hpp"
#include "ebsig/table.hpp"

namespace ebsig {

struct FitResult {
    GammaMixturePrior prior;
    std::string model;                   // "gps" | "k_gamma" | "general_gamma"
    double alpha = 1.0;                  // Dirichlet weight hyperparameter
    double log_marginal = 0.0;           // unpenalized log marginal likelihood
    // Penalized objective per iteration, with the component count alive at
    // that iteration alongside. Within a stretch of constant retained count
    // the objective never decreases; a pruning step removes (alpha-1)*log w
    // penalty terms and may step it down.
    std::vector<double> objective_trace;
    std::vector<std::size_t> retained_trace;
    std::size_t K_star = 0;              // retained (positive-weight) components
    bool converged = false;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
};

struct EcmOptions {
    double tol = 1e-8;          // relative penalized-objective change
    std::size_t max_iter = 5000;
    double init_eps = 1e-6;     // component variance at initialization
    std::uint64_t seed = 0;
};

// Marginal log-likelihood of the table under the negative-binomial mixture
// induced by the prior: sum_ij log sum_k w_k f_NB(N_ij | r_k, 1/(1+E_ij*h_k)).
// Straightforward per-cell log-sum-exp, independent of the fitter's fused
// kernels, so it doubles as a cross-check on them.
double nb_mixture_log_marginal(const ContingencyTable& table,
                               const ExpectedCounts& E,
                               const GammaMixturePrior& prior);

// Bi-level ECM for the mixture prior with Dirichlet(alpha) shrinkage on the
// weights. alpha in [0,1]; alpha = 1 is plain maximum likelihood, smaller
// values push weights to zero and prune components. Initialization is the
// seeded mean-variance draw from init_prior.
FitResult ecm_fit(const ContingencyTable& table, const ExpectedCounts& E,
                  double alpha, std::size_t K, const EcmOptions& opts = {});

// Two-component, no-shrinkage special case.
FitResult fit_gps(const ContingencyTable& table, const ExpectedCounts& E,
                  const EcmOptions& opts = {});

// Fixed-K maximum-likelihood mixture (no shrinkage).
FitResult fit_k_gamma(const ContingencyTable& table, const ExpectedCounts& E,
                      std::size_t K, const EcmOptions& opts = {});

// Like ecm_fit but starting from a caller-supplied prior instead of the
// seeded initialization (used by the tuning grid to share starts).
FitResult ecm_fit_from(const ContingencyTable& table, const ExpectedCounts& E,
                       double alpha, GammaMixturePrior start,
                       const EcmOptions& opts = {});

}  // namespace ebsig

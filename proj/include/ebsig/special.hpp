#pragma once

#include <cstdint>

namespace ebsig {

// lgamma(r + n) - lgamma(r), computed without the catastrophic cancellation
// the naive difference suffers when r is huge (mixture components initialized
// from a tiny-variance grid can carry shapes around 1e11). n is a count.
double lgamma_diff(double r, double n);

// digamma(r + n) - digamma(r), same stability contract as lgamma_diff.
double digamma_diff(double r, double n);

// Exact recurrences for integer n: sum_{t<n} log(r+t) and sum_{t<n} 1/(r+t).
// Slow but correct for any r; used as independent checks.
double lgamma_diff_by_recurrence(double r, std::uint64_t n);
double digamma_diff_by_recurrence(double r, std::uint64_t n);

// log Poisson pmf; lambda == 0 is a point mass at zero.
double poisson_log_pmf(double n, double lambda);

// log pmf of the negative binomial parameterized by shape r and success
// probability theta: Gamma(r+n)/(Gamma(r) n!) * theta^r (1-theta)^n.
double nb_log_pmf(double n, double r, double theta);

// Same pmf with theta = 1/(1 + e*h) substituted symbolically, which keeps
// full precision when e*h is tiny (theta indistinguishable from 1).
double nb_log_pmf_eh(double n, double r, double e, double h);

// Gamma distribution with shape/rate parameters; robust for huge shapes.
double gamma_cdf(double x, double shape, double rate);
double gamma_sf(double x, double shape, double rate);

}  // namespace ebsig

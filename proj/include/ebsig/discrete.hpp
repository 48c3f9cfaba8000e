#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "ebsig/table.hpp"

namespace ebsig {

// Prior supported on a finite grid of relative-risk values.
struct DiscretePrior {
    std::vector<double> support;  // strictly increasing, nonnegative
    std::vector<double> masses;   // simplex weights, aligned with support

    std::size_t size() const { return support.size(); }
    void validate() const;
};

// Log-linear spline prior g(alpha) = exp(Q*alpha - phi) on a finite grid.
struct EfronPrior {
    std::vector<double> support;
    Eigen::MatrixXd basis;        // K x p natural cubic spline design
    Eigen::VectorXd coefficients; // p-vector
    double penalty = 0.0;         // group-l2 weight c0
    double log_normalizer = 0.0;  // phi(alpha)
    std::vector<double> masses;   // g(alpha), strictly positive simplex

    std::size_t size() const { return support.size(); }
    int dof() const { return static_cast<int>(basis.cols()); }
    void validate() const;
    DiscretePrior as_discrete() const { return {support, masses}; }
};

struct DiscreteFitResult {
    DiscretePrior prior;
    std::string model;                   // "km"
    double log_marginal = 0.0;
    std::vector<double> objective_trace;
    double kkt_residual = 0.0;           // max_k mean gradient ratio - 1
    bool converged = false;
    int iterations = 0;
};

struct EfronFitResult {
    EfronPrior prior;
    std::string model;                    // "efron"
    double log_marginal = 0.0;            // unpenalized, at the optimum
    double penalized_objective = 0.0;
    std::vector<double> objective_trace;  // penalized, per accepted step
    double gradient_norm = 0.0;           // sup norm at the last iterate
    bool converged = false;
    int iterations = 0;
};

enum class SupportScale { log, linear };

// Grid of `count` points spanning [max(1e-4, min O/E), 1.2 * max O/E], with
// the null value 1 inserted when absent.
std::vector<double> make_support(const ContingencyTable& table,
                                 const ExpectedCounts& expected, int count,
                                 SupportScale scale = SupportScale::log);

inline constexpr int kKmSupportSize = 100;
inline constexpr int kEfronSupportSize = 120;

struct KmOptions {
    double tol = 1e-10;      // relative objective change
    double kkt_tol = 1e-6;   // stationarity certificate slack
    int max_iter = 20000;
};

// Nonparametric MLE of the mixing distribution over a fixed support, by
// multiplicative expectation-maximization on the cell marginals
//   p_ij = sum_k g_k Poisson(N_ij | v_k E_ij).
DiscreteFitResult km_fit(const ContingencyTable& table,
                         const ExpectedCounts& expected,
                         std::span<const double> support,
                         const KmOptions& options = {});

struct EfronOptions {
    double grad_tol = 1e-8;  // sup-norm tolerance, relative to max(1, |objective|)
    int max_iter = 5000;
};

// Penalized exponential-family fit: maximize over alpha
//   sum_ij log(P_ij^T g(alpha)) - c0 * sqrt(sum alpha^2 + 1e-12),
// g(alpha) = exp(Q alpha - phi(alpha)), by BFGS with analytic gradients.
EfronFitResult efron_fit(const ContingencyTable& table,
                              const ExpectedCounts& expected, int dof,
                              double penalty, std::span<const double> support,
                              const EfronOptions& options = {});

// Effective degrees of freedom trace(H_pen^-1 H_0), where H_pen and H_0 are
// the penalized and unpenalized coefficient Hessians at the fitted optimum.
// Equals the spline rank when the penalty is zero; errors when H_pen is not
// negative definite.
double efron_effective_dof(const EfronFitResult& fit,
                           const ContingencyTable& table,
                           const ExpectedCounts& expected);

// Akaike score with ridge-adjusted degrees of freedom:
//   2 * efron_effective_dof - 2 * log marginal likelihood.
double efron_aic(const EfronFitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected);

// Fixed data for the spline-grid objective; exposed so tests can probe the
// analytic derivatives directly.
class EfronObjective {
public:
    EfronObjective(const ContingencyTable& table,
                        const ExpectedCounts& expected, int dof, double penalty,
                        std::span<const double> support);

    int dof() const { return static_cast<int>(basis_.cols()); }
    const Eigen::MatrixXd& basis() const { return basis_; }
    std::span<const double> support() const { return support_; }
    double penalty() const { return penalty_; }

    Eigen::VectorXd masses(const Eigen::VectorXd& alpha) const;
    double log_normalizer(const Eigen::VectorXd& alpha) const;
    double value(const Eigen::VectorXd& alpha) const;        // penalized
    double log_marginal(const Eigen::VectorXd& alpha) const; // unpenalized
    Eigen::VectorXd gradient(const Eigen::VectorXd& alpha) const;
    // Hessian of the unpenalized log marginal likelihood.
    Eigen::MatrixXd hessian_log_marginal(const Eigen::VectorXd& alpha) const;
    // Hessian of the smoothed group-l2 penalty term sqrt(sum alpha^2 + 1e-12).
    Eigen::MatrixXd hessian_penalty(const Eigen::VectorXd& alpha) const;

private:
    std::vector<double> support_;
    Eigen::MatrixXd basis_;       // K x p
    Eigen::MatrixXd scaled_lik_;  // K x cells, per-cell max scaled to 1
    double offset_sum_ = 0.0;     // sum of per-cell log scale factors
    double penalty_ = 0.0;
};

}  // namespace ebsig

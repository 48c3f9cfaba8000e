#include "ebsig/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ebsig/errors.hpp"
#include "ebsig/kernels.hpp"
#include "ebsig/special.hpp"
#include "ebsig/spline.hpp"

namespace ebsig {
namespace {

constexpr double kPenaltyFloor = 1e-12;  // smooths the group-l2 norm at 0

void check_support(std::span<const double> support, bool need_positive) {
    if (support.empty()) throw UsageError("support grid is empty");
    for (std::size_t k = 0; k < support.size(); ++k) {
        if (!std::isfinite(support[k]) || support[k] < 0.0)
            throw UsageError("support grid values must be finite and nonnegative");
        if (need_positive && support[k] == 0.0)
            throw UsageError("support grid values must be strictly positive for the spline prior");
        if (k > 0 && !(support[k] > support[k - 1]))
            throw UsageError("support grid must be strictly increasing");
    }
}

// Poisson log likelihood of every cell at every support point, shifted so each
// cell's largest entry is exp(0)=1. Layout: row k contiguous over cells.
struct ScaledLik {
    std::size_t cells = 0;
    std::vector<double> lik;      // size K * cells, exp-scale
    std::vector<double> offsets;  // per-cell shift (max log likelihood)
};

ScaledLik scaled_likelihood(const ContingencyTable& table,
                            const ExpectedCounts& expected,
                            std::span<const double> support) {
    if (!expected.values.same_shape(table.counts))
        throw DataError("expected counts do not match the table shape");
    const std::size_t rows = table.counts.rows();
    const std::size_t cols = table.counts.cols();
    const std::size_t n = rows * cols;
    const std::size_t K = support.size();
    ScaledLik out;
    out.cells = n;
    out.lik.assign(K * n, 0.0);
    out.offsets.assign(n, -std::numeric_limits<double>::infinity());
    std::vector<double> loglik(K * n);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t c = i * cols + j;
            const auto count = static_cast<double>(table.counts(i, j));
            const double e = expected.values(i, j);
            if (!(e > 0.0) || !std::isfinite(e))
                throw DataError("expected count must be positive and finite for AE '" +
                                table.ae_names[i] + "', drug '" + table.drug_names[j] + "'");
            for (std::size_t k = 0; k < K; ++k) {
                const double lp = poisson_log_pmf(count, support[k] * e);
                loglik[k * n + c] = lp;
                out.offsets[c] = std::max(out.offsets[c], lp);
            }
            if (!std::isfinite(out.offsets[c]))
                throw UsageError("support grid excludes every plausible relative risk for AE '" +
                                 table.ae_names[i] + "', drug '" + table.drug_names[j] +
                                 "'; widen the support");
        }
    }
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < n; ++c)
            out.lik[k * n + c] = std::exp(loglik[k * n + c] - out.offsets[c]);
    return out;
}

}  // namespace

void DiscretePrior::validate() const {
    check_support(support, false);
    if (masses.size() != support.size())
        throw DataError("discrete prior: masses and support differ in length");
    double total = 0.0;
    for (double g : masses) {
        if (!std::isfinite(g) || g < 0.0)
            throw DataError("discrete prior: masses must be finite and nonnegative");
        total += g;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError("discrete prior: masses sum to " + std::to_string(total) +
                        ", expected 1");
}

void EfronPrior::validate() const {
    check_support(support, true);
    const auto K = static_cast<Eigen::Index>(support.size());
    if (basis.rows() != K)
        throw DataError("spline prior: basis rows do not match the support size");
    if (basis.cols() < 2 || basis.cols() >= K)
        throw DataError("spline prior: basis rank must lie in [2, support size)");
    if (coefficients.size() != basis.cols())
        throw DataError("spline prior: coefficient length does not match the basis");
    if (!(penalty >= 0.0) || !std::isfinite(penalty))
        throw DataError("spline prior: penalty must be finite and nonnegative");
    if (masses.size() != support.size())
        throw DataError("spline prior: masses and support differ in length");
    double total = 0.0;
    for (double g : masses) {
        if (!std::isfinite(g) || !(g > 0.0))
            throw DataError("spline prior: masses must be strictly positive");
        total += g;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError("spline prior: masses sum to " + std::to_string(total) +
                        ", expected 1");
}

std::vector<double> make_support(const ContingencyTable& table,
                                 const ExpectedCounts& expected, int count,
                                 SupportScale scale) {
    if (count < 2) throw UsageError("support grid needs at least 2 points");
    if (!expected.values.same_shape(table.counts))
        throw DataError("expected counts do not match the table shape");
    double lo_ratio = std::numeric_limits<double>::infinity();
    double hi_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < table.counts.rows(); ++i) {
        for (std::size_t j = 0; j < table.counts.cols(); ++j) {
            const double e = expected.values(i, j);
            if (!(e > 0.0) || !std::isfinite(e))
                throw DataError("expected count must be positive and finite for AE '" +
                                table.ae_names[i] + "', drug '" + table.drug_names[j] + "'");
            const double ratio = static_cast<double>(table.counts(i, j)) / e;
            lo_ratio = std::min(lo_ratio, ratio);
            hi_ratio = std::max(hi_ratio, ratio);
        }
    }
    const double lo = std::max(1e-4, lo_ratio);
    const double hi = 1.2 * hi_ratio;
    if (!(hi_ratio > lo_ratio) || !(hi > lo))
        throw DataError("degenerate observed/expected range [" + std::to_string(lo_ratio) +
                        ", " + std::to_string(hi_ratio) + "]; cannot build a support grid");
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double frac = static_cast<double>(k) / (count - 1);
        grid[static_cast<std::size_t>(k)] =
            scale == SupportScale::log ? std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo)))
                                       : lo + frac * (hi - lo);
    }
    if (std::find(grid.begin(), grid.end(), 1.0) == grid.end())
        grid.insert(std::lower_bound(grid.begin(), grid.end(), 1.0), 1.0);
    return grid;
}

DiscreteFitResult km_fit(const ContingencyTable& table,
                         const ExpectedCounts& expected,
                         std::span<const double> support,
                         const KmOptions& options) {
    check_support(support, false);
    if (!(options.tol > 0.0)) throw UsageError("km_fit: tolerance must be positive");
    if (options.max_iter < 1) throw UsageError("km_fit: max_iter must be at least 1");
    const ScaledLik data = scaled_likelihood(table, expected, support);
    const std::size_t K = support.size();
    const std::size_t n = data.cells;
    const auto& ops = kern::active();
    const auto nd = static_cast<double>(n);

    std::vector<double> g(K, 1.0 / static_cast<double>(K));
    std::vector<double> phat(n), q(n), ratio(K);
    DiscreteFitResult result;
    result.model = "km";
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int iter = 0;; ++iter) {
        std::fill(phat.begin(), phat.end(), 0.0);
        for (std::size_t k = 0; k < K; ++k)
            if (g[k] != 0.0) ops.axpy(phat.data(), data.lik.data() + k * n, g[k], n);
        const double obj = ops.sum_add_log(data.offsets.data(), phat.data(), n);
        if (!std::isfinite(obj))
            throw NumericalError("km_fit: objective became non-finite");
        result.objective_trace.push_back(obj);
        q = phat;
        ops.recip(q.data(), n);
        for (std::size_t k = 0; k < K; ++k)
            ratio[k] = ops.dot(data.lik.data() + k * n, q.data(), n) / nd;
        // Converged when the objective has flattened AND the simplex
        // stationarity certificate max_k mean ratio <= 1 + kkt_tol holds; the
        // objective alone can stall while the certificate still moves.
        const double kkt = *std::max_element(ratio.begin(), ratio.end()) - 1.0;
        const bool done = iter > 0 &&
                          std::abs(obj - prev) <= options.tol * std::max(1.0, std::abs(obj)) &&
                          kkt <= options.kkt_tol;
        if (done || iter >= options.max_iter) {
            result.converged = done;
            result.iterations = iter;
            result.log_marginal = obj;
            result.kkt_residual = kkt;
            break;
        }
        prev = obj;
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            g[k] *= ratio[k];
            total += g[k];
        }
        for (std::size_t k = 0; k < K; ++k) g[k] /= total;
    }
    result.prior.support.assign(support.begin(), support.end());
    result.prior.masses = std::move(g);
    result.prior.validate();
    return result;
}

EfronObjective::EfronObjective(const ContingencyTable& table,
                               const ExpectedCounts& expected, int dof,
                               double penalty, std::span<const double> support)
    : support_(support.begin(), support.end()), penalty_(penalty) {
    check_support(support, true);
    if (dof < 2) throw UsageError("efron_fit: spline rank must be at least 2");
    if (static_cast<std::size_t>(dof) >= support.size())
        throw UsageError("efron_fit: spline rank must be below the support size");
    if (!(penalty >= 0.0) || !std::isfinite(penalty))
        throw UsageError("efron_fit: penalty must be finite and nonnegative");
    basis_ = natural_spline_basis(support_, dof);
    const ScaledLik data = scaled_likelihood(table, expected, support);
    const auto K = static_cast<Eigen::Index>(support.size());
    const auto n = static_cast<Eigen::Index>(data.cells);
    scaled_lik_.resize(K, n);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index c = 0; c < n; ++c)
            scaled_lik_(k, c) = data.lik[static_cast<std::size_t>(k) * data.cells +
                                         static_cast<std::size_t>(c)];
    offset_sum_ = 0.0;
    for (double m : data.offsets) offset_sum_ += m;
}

double EfronObjective::log_normalizer(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd eta = basis_ * alpha;
    const double m = eta.maxCoeff();
    return m + std::log((eta.array() - m).exp().sum());
}

Eigen::VectorXd EfronObjective::masses(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd eta = basis_ * alpha;
    const double m = eta.maxCoeff();
    Eigen::VectorXd g = (eta.array() - m).exp();
    g /= g.sum();
    return g;
}

double EfronObjective::log_marginal(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd u = scaled_lik_.transpose() * masses(alpha);
    return u.array().log().sum() + offset_sum_;
}

double EfronObjective::value(const Eigen::VectorXd& alpha) const {
    const double s = std::sqrt(alpha.squaredNorm() + kPenaltyFloor);
    return log_marginal(alpha) - penalty_ * s;
}

Eigen::VectorXd EfronObjective::gradient(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd g = masses(alpha);
    const Eigen::VectorXd u = scaled_lik_.transpose() * g;
    const Eigen::VectorXd wbar = g.cwiseProduct(scaled_lik_ * u.cwiseInverse());
    const auto n = static_cast<double>(scaled_lik_.cols());
    const double s = std::sqrt(alpha.squaredNorm() + kPenaltyFloor);
    return basis_.transpose() * (wbar - n * g) - (penalty_ / s) * alpha;
}

Eigen::MatrixXd EfronObjective::hessian_log_marginal(const Eigen::VectorXd& alpha) const {
    const Eigen::VectorXd g = masses(alpha);
    const Eigen::VectorXd u = scaled_lik_.transpose() * g;
    const Eigen::VectorXd t = u.cwiseInverse();
    const Eigen::VectorXd wbar = g.cwiseProduct(scaled_lik_ * t);
    const auto n = static_cast<double>(scaled_lik_.cols());
    // Columns of M are Q^T w_c for each cell c.
    Eigen::MatrixXd M = basis_.transpose() * g.asDiagonal() * scaled_lik_ * t.asDiagonal();
    const Eigen::VectorXd qg = basis_.transpose() * g;
    return basis_.transpose() * wbar.asDiagonal() * basis_ - M * M.transpose() -
           n * (basis_.transpose() * g.asDiagonal() * basis_ - qg * qg.transpose());
}

Eigen::MatrixXd EfronObjective::hessian_penalty(const Eigen::VectorXd& alpha) const {
    const double s = std::sqrt(alpha.squaredNorm() + kPenaltyFloor);
    const Eigen::VectorXd dir = alpha / s;
    Eigen::MatrixXd h = -dir * dir.transpose();
    h.diagonal().array() += 1.0;
    return h / s;
}

EfronFitResult efron_fit(const ContingencyTable& table,
                         const ExpectedCounts& expected, int dof, double penalty,
                         std::span<const double> support,
                         const EfronOptions& options) {
    if (!(options.grad_tol > 0.0)) throw UsageError("efron_fit: gradient tolerance must be positive");
    if (options.max_iter < 1) throw UsageError("efron_fit: max_iter must be at least 1");
    const EfronObjective problem(table, expected, dof, penalty, support);
    const auto p = static_cast<Eigen::Index>(problem.dof());

    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p);
    double val = problem.value(alpha);
    Eigen::VectorXd grad = problem.gradient(alpha);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p, p);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);

    EfronFitResult result;
    result.model = "efron";
    result.objective_trace.push_back(val);
    int accepted = 0;
    for (int iter = 0; iter < options.max_iter; ++iter) {
        if (grad.lpNorm<Eigen::Infinity>() <=
            options.grad_tol * std::max(1.0, std::abs(val)))
            break;
        Eigen::VectorXd dir = hinv * grad;  // ascent direction
        double slope = grad.dot(dir);
        if (!(slope > 0.0) || !dir.allFinite()) {
            hinv = eye;
            dir = grad;
            slope = grad.squaredNorm();
        }
        double step = 1.0;
        bool took = false;
        double new_val = val;
        while (step >= 1e-18) {
            new_val = problem.value(alpha + step * dir);
            if (std::isfinite(new_val) && new_val >= val + 1e-4 * step * slope) {
                took = true;
                break;
            }
            step *= 0.5;
        }
        if (!took) break;  // no productive step remains
        const Eigen::VectorXd alpha_new = alpha + step * dir;
        const Eigen::VectorXd grad_new = problem.gradient(alpha_new);
        const Eigen::VectorXd s = step * dir;
        const Eigen::VectorXd y = grad_new - grad;  // note: maximizing
        const double sy = -s.dot(y);                // curvature of -value
        if (sy > 1e-10 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd left = eye + rho * s * y.transpose();
            hinv = left * hinv * left.transpose() + rho * s * s.transpose();
        }
        alpha = alpha_new;
        val = new_val;
        grad = grad_new;
        result.objective_trace.push_back(val);
        ++accepted;
    }
    result.iterations = accepted;
    result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    result.converged =
        result.gradient_norm <= options.grad_tol * std::max(1.0, std::abs(val));
    result.penalized_objective = val;
    result.log_marginal = problem.log_marginal(alpha);
    result.prior.support = std::vector<double>(support.begin(), support.end());
    result.prior.basis = problem.basis();
    result.prior.coefficients = alpha;
    result.prior.penalty = penalty;
    result.prior.log_normalizer = problem.log_normalizer(alpha);
    const Eigen::VectorXd g = problem.masses(alpha);
    result.prior.masses.assign(g.data(), g.data() + g.size());
    result.prior.validate();
    return result;
}

double efron_effective_dof(const EfronFitResult& fit, const ContingencyTable& table,
                           const ExpectedCounts& expected) {
    fit.prior.validate();
    if (!fit.converged)
        throw UsageError("effective degrees of freedom require a converged fit");
    const int p = fit.prior.dof();
    if (fit.prior.penalty == 0.0) return static_cast<double>(p);
    const EfronObjective problem(table, expected, p, fit.prior.penalty,
                                 fit.prior.support);
    const Eigen::MatrixXd h0 = problem.hessian_log_marginal(fit.prior.coefficients);
    const Eigen::MatrixXd pen = problem.hessian_penalty(fit.prior.coefficients);
    const Eigen::MatrixXd hpen = h0 - fit.prior.penalty * pen;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hpen);
    if (es.info() != Eigen::Success)
        throw NumericalError("penalized Hessian eigendecomposition failed");
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    if (!(es.eigenvalues().maxCoeff() < -1e-12 * scale))
        throw NumericalError("penalized Hessian is singular or indefinite at the optimum; "
                             "increase the penalty c0");
    const Eigen::MatrixXd rotated =
        es.eigenvectors().transpose() * pen * es.eigenvectors();
    const double correction =
        rotated.diagonal().cwiseQuotient(es.eigenvalues()).sum();
    return static_cast<double>(p) + fit.prior.penalty * correction;
}

double efron_aic(const EfronFitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected) {
    return 2.0 * efron_effective_dof(fit, table, expected) - 2.0 * fit.log_marginal;
}

}  // namespace ebsig

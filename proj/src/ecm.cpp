#include "ebsig/ecm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "ebsig/errors.hpp"
#include "ebsig/kernels.hpp"
#include "ebsig/special.hpp"

namespace ebsig {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kShapeFloor = 1e-10;
constexpr double kScaleFloor = 1e-12;

struct CellData {
    std::size_t n = 0;
    std::vector<double> counts;    // N, flattened row-major
    std::vector<double> expected;  // E
    std::vector<double> c0;        // -lgamma(N+1) + N*log(E)
    std::vector<std::int32_t> didx;  // index into dvals per cell
    std::vector<double> dvals;       // sorted distinct count values
};

CellData make_cell_data(const ContingencyTable& table, const ExpectedCounts& E) {
    if (!table.counts.same_shape(E.values))
        throw DataError("expected counts do not match the table shape");
    CellData cd;
    cd.n = table.n_rows() * table.n_cols();
    cd.counts.resize(cd.n);
    cd.expected.resize(cd.n);
    cd.c0.resize(cd.n);
    cd.didx.resize(cd.n);

    std::map<std::int64_t, std::int32_t> distinct;
    for (std::size_t c = 0; c < cd.n; ++c) {
        const double e = E.values.data()[c];
        if (!(e > 0.0) || !std::isfinite(e))
            throw DataError("expected counts must be positive and finite");
        const std::int64_t cnt = table.counts.data()[c];
        cd.counts[c] = static_cast<double>(cnt);
        cd.expected[c] = e;
        cd.c0[c] = -std::lgamma(cd.counts[c] + 1.0) + cd.counts[c] * std::log(e);
        distinct.emplace(cnt, 0);
    }
    std::int32_t next = 0;
    for (auto& [value, index] : distinct) {
        index = next++;
        cd.dvals.push_back(static_cast<double>(value));
    }
    for (std::size_t c = 0; c < cd.n; ++c)
        cd.didx[c] = distinct.at(table.counts.data()[c]);
    return cd;
}

// Tables of lgamma(r+N)-lgamma(r) / digamma(r+N)-digamma(r) over the sorted
// distinct counts, filled incrementally so each entry costs at most the gap
// to its predecessor.
void fill_lgamma_table(double r, const std::vector<double>& dvals,
                       std::vector<double>& tab) {
    tab[0] = lgamma_diff(r, dvals[0]);
    for (std::size_t d = 1; d < dvals.size(); ++d)
        tab[d] = tab[d - 1] + lgamma_diff(r + dvals[d - 1], dvals[d] - dvals[d - 1]);
}

void fill_digamma_table(double r, const std::vector<double>& dvals,
                        std::vector<double>& tab) {
    tab[0] = digamma_diff(r, dvals[0]);
    for (std::size_t d = 1; d < dvals.size(); ++d)
        tab[d] = tab[d - 1] + digamma_diff(r + dvals[d - 1], dvals[d] - dvals[d - 1]);
}

FitResult run_ecm(const ContingencyTable& table, const ExpectedCounts& E,
                  double alpha, GammaMixturePrior start, const EcmOptions& opts,
                  const char* model) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw UsageError("alpha must lie in [0,1], got " + std::to_string(alpha));
    if (table.grand_total() == 0)
        throw DataError("cannot fit a table whose counts are all zero");
    start.validate();

    const CellData cd = make_cell_data(table, E);
    const auto& ops = kern::active();
    const std::size_t n = cd.n;
    const std::size_t D = cd.dvals.size();

    std::vector<double> w = start.weights, r = start.shapes, h = start.scales;
    std::size_t K = w.size();

    std::vector<double> LP(K * n), L1P(K * n);
    std::vector<double> tab(D), dgtab(D);
    std::vector<double> m(n), acc(n);
    std::vector<double> Stau(K), Sdelta(K), Snl(K), SN(K), wnew(K);

    FitResult result;
    result.model = model;
    result.alpha = alpha;
    result.seed = opts.seed;

    double prev_obj = -kInf;
    for (std::size_t u = 0;; ++u) {
        // E-step at the current parameters; also yields the objective.
        for (std::size_t k = 0; k < K; ++k) {
            ops.log1p_scale(&L1P[k * n], cd.expected.data(), h[k], n);
            fill_lgamma_table(r[k], cd.dvals, tab);
            ops.nb_logpmf(&LP[k * n], cd.didx.data(), tab.data(), cd.c0.data(),
                          cd.counts.data(), &L1P[k * n], std::log(w[k]),
                          std::log(h[k]), r[k], n);
        }
        std::copy(LP.begin(), LP.begin() + n, m.begin());
        for (std::size_t k = 1; k < K; ++k) ops.vmax(m.data(), &LP[k * n], n);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t k = 0; k < K; ++k)
            ops.exp_sub_store_add(&LP[k * n], m.data(), acc.data(), n);
        const double logL = ops.sum_add_log(m.data(), acc.data(), n);

        double obj = logL;
        if (alpha != 1.0)
            for (std::size_t k = 0; k < K; ++k) obj += (alpha - 1.0) * std::log(w[k]);
        if (!std::isfinite(obj))
            throw std::runtime_error("mixture fit: objective became non-finite at iteration " +
                                     std::to_string(u));
        result.objective_trace.push_back(obj);
        result.retained_trace.push_back(K);
        result.log_marginal = logL;

        if (u > 0 && std::abs(obj - prev_obj) <= opts.tol * std::max(1.0, std::abs(obj))) {
            result.converged = true;
            result.iterations = u;
            break;
        }
        if (u == opts.max_iter) {
            result.converged = false;
            result.iterations = opts.max_iter;
            break;
        }
        prev_obj = obj;

        // Normalize responsibilities in place: LP rows become tau.
        ops.recip(acc.data(), n);
        for (std::size_t k = 0; k < K; ++k) ops.mul(&LP[k * n], acc.data(), n);

        // Sufficient statistics per component.
        for (std::size_t k = 0; k < K; ++k) {
            const double* tau = &LP[k * n];
            Stau[k] = ops.sum(tau, n);
            fill_digamma_table(r[k], cd.dvals, dgtab);
            Sdelta[k] = r[k] * ops.dot_gather(tau, dgtab.data(), cd.didx.data(), n);
            Snl[k] = ops.dot(tau, &L1P[k * n], n);
            SN[k] = ops.dot(tau, cd.counts.data(), n);
        }

        // CM-1: shrunken weight update, truncated at zero, renormalized over
        // the survivors; then the shape update.
        const double denom =
            static_cast<double>(n) + static_cast<double>(K) * (alpha - 1.0);
        double wsum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double num = alpha - 1.0 + Stau[k];
            wnew[k] = std::max(0.0, denom > 0.0 ? num / denom : num);
            wsum += wnew[k];
        }
        if (wsum <= 0.0) {
            // Every weight truncated away; keep the dominant component.
            const std::size_t best = static_cast<std::size_t>(
                std::max_element(Stau.begin(), Stau.begin() + K) - Stau.begin());
            std::fill(wnew.begin(), wnew.begin() + K, 0.0);
            wnew[best] = 1.0;
            wsum = 1.0;
        }

        std::size_t kept = 0;
        for (std::size_t k = 0; k < K; ++k) {
            if (wnew[k] == 0.0) continue;  // pruned
            double rk = Snl[k] > 0.0 ? Sdelta[k] / Snl[k] : r[k];
            if (!(rk > kShapeFloor)) rk = kShapeFloor;

            // CM-2: fixed point for the scale given the fresh shape.
            double hk = h[k];
            for (int inner = 0; inner < 50; ++inner) {
                const double fp =
                    ops.fp_denom(&LP[k * n], cd.expected.data(), cd.counts.data(), rk, hk, n);
                if (!(fp > 0.0)) break;
                double hn = SN[k] / fp;
                if (!(hn > kScaleFloor)) hn = kScaleFloor;
                const bool done = std::abs(hn - hk) <= 1e-10 * std::abs(hn);
                hk = hn;
                if (done) break;
            }
            w[kept] = wnew[k] / wsum;
            r[kept] = rk;
            h[kept] = hk;
            ++kept;
        }
        K = kept;
    }

    w.resize(K);
    r.resize(K);
    h.resize(K);
    result.prior = GammaMixturePrior{std::move(w), std::move(r), std::move(h)};
    result.K_star = K;
    return result;
}

}  // namespace

double nb_mixture_log_marginal(const ContingencyTable& table,
                               const ExpectedCounts& E,
                               const GammaMixturePrior& prior) {
    prior.validate();
    if (!table.counts.same_shape(E.values))
        throw DataError("expected counts do not match the table shape");
    const std::size_t K = prior.size();
    double total = 0.0;
    std::vector<double> lp(K);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        for (std::size_t j = 0; j < table.n_cols(); ++j) {
            const double cnt = static_cast<double>(table.counts(i, j));
            const double e = E.values(i, j);
            double m = -kInf;
            for (std::size_t k = 0; k < K; ++k) {
                lp[k] = prior.weights[k] > 0.0
                            ? std::log(prior.weights[k]) +
                                  nb_log_pmf_eh(cnt, prior.shapes[k], e, prior.scales[k])
                            : -kInf;
                if (std::isnan(lp[k]))
                    throw std::runtime_error(
                        "non-finite mixture term at cell (" + std::to_string(i + 1) + "," +
                        std::to_string(j + 1) + "), component " + std::to_string(k + 1));
                m = std::max(m, lp[k]);
            }
            if (m == -kInf)
                throw std::runtime_error("zero marginal probability at cell (" +
                                         std::to_string(i + 1) + "," +
                                         std::to_string(j + 1) + ")");
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += std::exp(lp[k] - m);
            total += m + std::log(s);
        }
    }
    return total;
}

FitResult ecm_fit(const ContingencyTable& table, const ExpectedCounts& E,
                  double alpha, std::size_t K, const EcmOptions& opts) {
    if (K < 1) throw UsageError("component count must be at least 1");
    GammaMixturePrior start = init_prior(table, E, K, opts.init_eps, opts.seed);
    return run_ecm(table, E, alpha, std::move(start), opts, "general_gamma");
}

FitResult ecm_fit_from(const ContingencyTable& table, const ExpectedCounts& E,
                       double alpha, GammaMixturePrior start,
                       const EcmOptions& opts) {
    return run_ecm(table, E, alpha, std::move(start), opts, "general_gamma");
}

FitResult fit_gps(const ContingencyTable& table, const ExpectedCounts& E,
                  const EcmOptions& opts) {
    GammaMixturePrior start = init_prior(table, E, 2, opts.init_eps, opts.seed);
    FitResult result = run_ecm(table, E, 1.0, std::move(start), opts, "gps");
    return result;
}

FitResult fit_k_gamma(const ContingencyTable& table, const ExpectedCounts& E,
                      std::size_t K, const EcmOptions& opts) {
    if (K < 1) throw UsageError("component count must be at least 1");
    GammaMixturePrior start = init_prior(table, E, K, opts.init_eps, opts.seed);
    FitResult result = run_ecm(table, E, 1.0, std::move(start), opts, "k_gamma");
    return result;
}

}  // namespace ebsig

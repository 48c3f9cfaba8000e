#include "ebsig/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include "ebsig/ecm.hpp"
#include "ebsig/errors.hpp"
#include "ebsig/quantile.hpp"
#include "ebsig/rng.hpp"
#include "ebsig/selection.hpp"

namespace ebsig {

namespace {

constexpr std::uint64_t kTableTag = 0x7461626c;  // per-table count streams
constexpr std::uint64_t kZeroTag = 0x7a65726f;   // indicator draw stream
constexpr std::uint64_t kRepTag = 0x726570;      // per-replicate fit/draw streams

// One cell's scaled transport distance from draws; shared by the metric
// aggregator and the study runner so identical draws score identically.
double scaled_gap(std::span<const double> draws, double lambda0, int p) {
    double acc = 0.0;
    for (double d : draws) {
        const double gap = std::abs(d - lambda0);
        acc += p == 2 ? gap * gap : gap;
    }
    acc /= static_cast<double>(draws.size());
    return (p == 2 ? std::sqrt(acc) : acc) / lambda0;
}

}  // namespace

void SignalMatrix::validate() const {
    const std::size_t rows = values.rows(), cols = values.cols();
    if (rows < 2 || cols < 2) throw DataError("signal matrix must be at least 2x2");
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = values(i, j);
            if (!std::isfinite(v) || v < 0.0)
                throw DataError("signal strengths must be finite and nonnegative");
            if (v > 0.0 && v < 1.0)
                throw DataError(
                    "signal strengths are 0 (structural zero) or at least 1");
            if ((i + 1 == rows || j + 1 == cols) && v != 1.0)
                throw DataError("reference row and column keep signal strength 1");
        }
    }
}

SignalMatrix uniform_signal(std::size_t rows, std::size_t cols) {
    SignalMatrix signal;
    signal.values = Grid<double>(rows, cols, 1.0);
    return signal;
}

void ZeroIndicator::mask_reference() {
    const std::size_t rows = z.rows(), cols = z.cols();
    if (rows == 0 || cols == 0) return;
    for (std::size_t j = 0; j < cols; ++j) z(rows - 1, j) = 0;
    for (std::size_t i = 0; i < rows; ++i) z(i, cols - 1) = 0;
}

void ZeroIndicator::validate() const {
    const std::size_t rows = z.rows(), cols = z.cols();
    for (std::size_t j = 0; j < cols; ++j)
        if (rows > 0 && z(rows - 1, j))
            throw DataError("structural zeros may not sit on the reference row");
    for (std::size_t i = 0; i < rows; ++i)
        if (cols > 0 && z(i, cols - 1))
            throw DataError("structural zeros may not sit on the reference column");
}

ZeroIndicator zero_indicator_from_E(const ExpectedCounts& expected, double q) {
    if (!(q >= 0.0 && q < 1.0))
        throw UsageError("zero-inflation quantile must lie in [0, 1)");
    const auto& e = expected.values;
    if (e.rows() < 2 || e.cols() < 2)
        throw UsageError("expected-count grid must be at least 2x2");
    ZeroIndicator out;
    out.origin = ZeroOrigin::quantile_of_e;
    out.z = Grid<std::uint8_t>(e.rows(), e.cols(), 0);
    // q = 0 marks nothing; an inclusive threshold would always catch the
    // minimum-tied cells, which is never the intent of "no zero-inflation".
    if (q > 0.0) {
        const std::vector<double> flat(e.data(), e.data() + e.size());
        const double threshold = type7_quantile_unsorted(flat, q);
        for (std::size_t i = 0; i < e.rows(); ++i)
            for (std::size_t j = 0; j < e.cols(); ++j)
                out.z(i, j) = e(i, j) <= threshold ? 1 : 0;
    }
    out.mask_reference();
    return out;
}

ZeroIndicator zero_indicator_bernoulli(std::size_t rows, std::size_t cols,
                                       double omega, std::uint64_t seed) {
    if (!(omega >= 0.0 && omega < 1.0))
        throw UsageError("structural-zero probability must lie in [0, 1)");
    ZeroIndicator out;
    out.origin = ZeroOrigin::bernoulli;
    out.z = Grid<std::uint8_t>(rows, cols, 0);
    Rng rng(substream_key(seed, kZeroTag));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out.z(i, j) = rng.next_double() < omega ? 1 : 0;
    out.mask_reference();
    return out;
}

std::vector<ContingencyTable> generate_contin_table(
    const ContingencyTable& ref_table, const SignalMatrix& signal,
    const ZeroIndicator& zeros, std::size_t n_tables, std::uint64_t seed) {
    ref_table.validate();
    signal.validate();
    zeros.validate();
    if (!signal.values.same_shape(ref_table.counts) ||
        !zeros.z.same_shape(ref_table.counts))
        throw UsageError(
            "signal matrix and zero indicator must match the reference table shape");
    const std::size_t rows = ref_table.n_rows(), cols = ref_table.n_cols();
    const std::int64_t grand = ref_table.grand_total();
    if (grand <= 0) throw DataError("reference table has no reports to apportion");

    std::vector<double> weight(rows * cols, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double rowshare = static_cast<double>(ref_table.row_total(i));
        for (std::size_t j = 0; j < cols; ++j) {
            const double w = zeros.z(i, j)
                                 ? 0.0
                                 : signal.values(i, j) * rowshare *
                                       static_cast<double>(ref_table.col_total(j));
            weight[i * cols + j] = w;
            total += w;
        }
    }
    if (total <= 0.0)
        throw DataError(
            "structural zeros and margins leave no cell with positive probability");
    for (double& w : weight) w /= total;

    const AliasTable alias(weight);
    std::vector<ContingencyTable> out;
    out.reserve(n_tables);
    for (std::size_t t = 0; t < n_tables; ++t) {
        ContingencyTable table;
        table.ae_names = ref_table.ae_names;
        table.drug_names = ref_table.drug_names;
        table.counts = Grid<std::int64_t>(rows, cols, 0);
        Rng rng(substream_key(seed, kTableTag, t));
        std::int64_t* counts = table.counts.data();
        for (std::int64_t s = 0; s < grand; ++s) ++counts[alias.draw(rng)];
        out.push_back(std::move(table));
    }
    return out;
}

MetricSummary aggregate_metrics(
    std::span<const PosteriorDraws> draws_per_replicate, const SignalMatrix& signal,
    std::span<const std::pair<std::size_t, std::size_t>> signal_cells, int p) {
    if (draws_per_replicate.empty())
        throw UsageError("at least one replicate of posterior draws is required");
    if (signal_cells.empty()) throw UsageError("signal cell set must be nonempty");
    if (p != 1 && p != 2) throw UsageError("transport order must be 1 or 2");
    const std::size_t rows = signal.values.rows(), cols = signal.values.cols();
    for (const auto& [i, j] : signal_cells) {
        if (i >= rows || j >= cols) throw UsageError("signal cell outside the table");
        if (!(signal.values(i, j) > 1.0))
            throw UsageError("signal cells must carry true strength above 1");
    }
    double avg_sum = 0.0, max_sum = 0.0;
    for (const PosteriorDraws& rep : draws_per_replicate) {
        if (rep.rows != rows || rep.cols != cols)
            throw UsageError("draw grid shape must match the signal matrix");
        if (rep.draw_count < 1) throw UsageError("replicate holds no draws");
        double cell_sum = 0.0, cell_max = 0.0;
        std::vector<double> cell(rep.draw_count);
        for (const auto& [i, j] : signal_cells) {
            for (std::size_t s = 0; s < rep.draw_count; ++s) cell[s] = rep.at(s, i, j);
            const double scaled = scaled_gap(cell, signal.values(i, j), p);
            cell_sum += scaled;
            cell_max = std::max(cell_max, scaled);
        }
        avg_sum += cell_sum / static_cast<double>(signal_cells.size());
        max_sum += cell_max;
    }
    const double m = static_cast<double>(draws_per_replicate.size());
    return {avg_sum / m, max_sum / m};
}

namespace {

struct Policy {
    enum Kind { fix, by_aic, by_bic };
    std::string name;
    Kind kind = fix;
    double alpha = 0.0;
};

Policy parse_policy(const std::string& name) {
    Policy policy;
    policy.name = name;
    if (name == "AIC") {
        policy.kind = Policy::by_aic;
        return policy;
    }
    if (name == "BIC") {
        policy.kind = Policy::by_bic;
        return policy;
    }
    if (name.rfind("fix_", 0) == 0) {
        const std::string tail = name.substr(4);
        try {
            std::size_t used = 0;
            const double alpha = std::stod(tail, &used);
            if (used == tail.size() && alpha >= 0.0 && alpha <= 1.0) {
                policy.alpha = alpha;
                return policy;
            }
        } catch (const std::exception&) {
        }
    }
    throw UsageError("unknown policy '" + name +
                     "'; expected AIC, BIC, or fix_<alpha in [0,1]>");
}

// Per-policy scores for one generated table, plus the raw signal-cell
// draws when the caller wants them back.
struct RepScores {
    std::vector<double> max_scaled;
    std::vector<double> ave_scaled;
    std::vector<std::vector<std::vector<double>>> draws;  // [policy][cell]
};

RepScores score_replicate(const ContingencyTable& table, const StudyConfig& config,
                          const std::vector<Policy>& policies,
                          const std::vector<double>& fit_alphas,
                          const SignalMatrix& signal, std::uint64_t rep_key,
                          bool keep_draws) {
    const ExpectedCounts expected =
        estimate_null_expected_count(table, config.expected);
    EcmOptions opts;
    opts.seed = rep_key;
    const GammaMixturePrior start = init_prior(
        table, expected, default_component_count(table), opts.init_eps, rep_key);
    std::vector<FitResult> fits;
    fits.reserve(fit_alphas.size());
    for (double alpha : fit_alphas)
        fits.push_back(ecm_fit_from(table, expected, alpha, start, opts));

    // Criterion argmins over the tuning grid (the fit list's prefix).
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::size_t pick_aic = fit_alphas.size(), pick_bic = fit_alphas.size();
    double best_aic = kInf, best_bic = kInf;
    for (std::size_t i = 0; i < config.alpha_grid.size(); ++i) {
        if (!fits[i].converged) continue;
        const double aic = aic_general_gamma(fits[i]);
        const double bic = bic_general_gamma(fits[i], table);
        if (aic < best_aic) {
            best_aic = aic;
            pick_aic = i;
        }
        if (bic < best_bic) {
            best_bic = bic;
            pick_bic = i;
        }
    }

    RepScores scores;
    for (const Policy& policy : policies) {
        const FitResult* fit = nullptr;
        if (policy.kind == Policy::fix) {
            for (std::size_t i = 0; i < fit_alphas.size(); ++i)
                if (fit_alphas[i] == policy.alpha) {
                    fit = &fits[i];
                    break;
                }
        } else {
            const std::size_t pick =
                policy.kind == Policy::by_aic ? pick_aic : pick_bic;
            if (pick == fit_alphas.size())
                throw NumericalError(
                    "no tuning fit converged for a replicate; cannot apply the " +
                    policy.name + " policy");
            fit = &fits[pick];
        }
        double cell_sum = 0.0, cell_max = 0.0;
        std::vector<std::vector<double>> kept;
        for (const auto& [i, j] : config.signal_cells) {
            const CellPosterior post =
                cell_posterior(fit->prior, static_cast<double>(table.counts(i, j)),
                               expected.values(i, j));
            std::vector<double> draws =
                posterior_cell_draws(post, i, j, config.draw_count, rep_key);
            const double scaled = scaled_gap(draws, signal.values(i, j), 2);
            cell_sum += scaled;
            cell_max = std::max(cell_max, scaled);
            if (keep_draws) kept.push_back(std::move(draws));
        }
        scores.ave_scaled.push_back(cell_sum /
                                    static_cast<double>(config.signal_cells.size()));
        scores.max_scaled.push_back(cell_max);
        if (keep_draws) scores.draws.push_back(std::move(kept));
    }
    return scores;
}

}  // namespace

std::vector<StudyRecord> run_simulation_study(const ContingencyTable& ref_table,
                                              const StudyConfig& config,
                                              std::vector<CapturedCellDraws>* capture) {
    ref_table.validate();
    if (config.signal_cells.empty())
        throw UsageError("study needs at least one signal cell");
    if (config.lambda_grid.empty())
        throw UsageError("study needs at least one signal strength");
    for (double lambda : config.lambda_grid)
        if (!(lambda > 1.0)) throw UsageError("signal strengths must exceed 1");
    if (config.zi_grid.empty())
        throw UsageError("study needs at least one zero-inflation level");
    for (double q : config.zi_grid)
        if (!(q >= 0.0 && q < 1.0))
            throw UsageError("zero-inflation levels must lie in [0, 1)");
    if (config.alpha_grid.empty()) throw UsageError("alpha grid must be nonempty");
    for (double alpha : config.alpha_grid)
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw UsageError("alpha grid values must lie in [0, 1]");
    if (config.policies.empty()) throw UsageError("at least one policy is required");
    if (config.n_sim < 1) throw UsageError("need at least one replicate");
    if (config.draw_count < 1) throw UsageError("need at least one posterior draw");

    const std::size_t rows = ref_table.n_rows(), cols = ref_table.n_cols();
    for (const auto& [i, j] : config.signal_cells) {
        if (i >= rows || j >= cols) throw UsageError("signal cell outside the table");
        if (i + 1 == rows || j + 1 == cols)
            throw UsageError("signal cells may not sit on the reference margin");
    }

    std::vector<Policy> policies;
    policies.reserve(config.policies.size());
    for (const std::string& name : config.policies)
        policies.push_back(parse_policy(name));

    // Fit list: the tuning grid first, then any pinned values off the grid.
    std::vector<double> fit_alphas(config.alpha_grid.begin(),
                                   config.alpha_grid.end());
    for (const Policy& policy : policies)
        if (policy.kind == Policy::fix &&
            std::find(fit_alphas.begin(), fit_alphas.end(), policy.alpha) ==
                fit_alphas.end())
            fit_alphas.push_back(policy.alpha);

    const ExpectedCounts ref_expected =
        estimate_null_expected_count(ref_table, config.expected);

    std::vector<StudyRecord> records;
    for (double zi : config.zi_grid) {
        ZeroIndicator zeros = zero_indicator_from_E(ref_expected, zi);
        // Zeros land among null cells only; signals stay live.
        for (const auto& [i, j] : config.signal_cells) zeros.z(i, j) = 0;
        for (double lambda : config.lambda_grid) {
            SignalMatrix signal = uniform_signal(rows, cols);
            for (const auto& [i, j] : config.signal_cells)
                signal.values(i, j) = lambda;
            const auto tables = generate_contin_table(ref_table, signal, zeros,
                                                      config.n_sim, config.seed);
            std::vector<RepScores> scored(config.n_sim);
            const std::size_t wave = std::max<std::size_t>(
                1, std::min<std::size_t>(config.n_sim,
                                         std::thread::hardware_concurrency()));
            for (std::size_t base = 0; base < config.n_sim; base += wave) {
                const std::size_t end = std::min(config.n_sim, base + wave);
                std::vector<std::future<RepScores>> tasks;
                tasks.reserve(end - base);
                for (std::size_t m = base; m < end; ++m)
                    tasks.push_back(std::async(std::launch::async, [&, m] {
                        return score_replicate(tables[m], config, policies,
                                               fit_alphas, signal,
                                               substream_key(config.seed, kRepTag, m),
                                               capture != nullptr);
                    }));
                for (std::size_t m = base; m < end; ++m)
                    scored[m] = tasks[m - base].get();
            }
            if (capture) {
                for (std::size_t m = 0; m < config.n_sim; ++m)
                    for (std::size_t pi = 0; pi < policies.size(); ++pi)
                        for (std::size_t c = 0; c < config.signal_cells.size(); ++c)
                            capture->push_back({policies[pi].name, zi, lambda, m,
                                                config.signal_cells[c].first,
                                                config.signal_cells[c].second,
                                                std::move(scored[m].draws[pi][c])});
            }
            for (std::size_t pi = 0; pi < policies.size(); ++pi) {
                double max_sum = 0.0, ave_sum = 0.0;
                for (const RepScores& rep : scored) {
                    max_sum += rep.max_scaled[pi];
                    ave_sum += rep.ave_scaled[pi];
                }
                const double m = static_cast<double>(config.n_sim);
                records.push_back(
                    {policies[pi].name, zi, lambda, "Max_Scaled_RMSE", max_sum / m});
                records.push_back(
                    {policies[pi].name, zi, lambda, "Ave_Scaled_RMSE", ave_sum / m});
            }
        }
    }
    return records;
}

std::vector<StudyRecord> run_simulation_study(const ContingencyTable& ref_table,
                                              const StudyConfig& config) {
    return run_simulation_study(ref_table, config, nullptr);
}

}  // namespace ebsig

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ebsig/grid.hpp"
#include "ebsig/posterior.hpp"
#include "ebsig/table.hpp"

namespace ebsig {

// True relative-risk surface driving the generator: 0 marks a structural
// zero, 1 the null, values above 1 a signal. The reference row and column
// stay at 1.
struct SignalMatrix {
    Grid<double> values{0, 0, 1.0};

    void validate() const;  // DataError on violations
};

SignalMatrix uniform_signal(std::size_t rows, std::size_t cols);

enum class ZeroOrigin { bernoulli, quantile_of_e, explicit_mask };

// Cells barred from receiving any reports. Never on the reference margin.
struct ZeroIndicator {
    Grid<std::uint8_t> z{0, 0, 0};
    ZeroOrigin origin = ZeroOrigin::explicit_mask;

    void mask_reference();  // clear the last row and column
    void validate() const;  // DataError when the reference margin is marked
};

// Marks cells whose expected count sits at or below the q-th empirical
// quantile (ties at the threshold included), then clears the reference
// margin. q = 0 marks nothing, leaving the generator untouched.
ZeroIndicator zero_indicator_from_E(const ExpectedCounts& expected, double q);

// Independent Bernoulli(omega) marks, reference margin cleared.
ZeroIndicator zero_indicator_bernoulli(std::size_t rows, std::size_t cols,
                                       double omega, std::uint64_t seed);

// Multinomial sampler conditioned on the reference table's grand total.
// Cell probabilities are proportional to
//   (1 - z_ij) * lambda_ij * rowshare_i * colshare_j
// with the shares taken from the reference table margins; each output
// table draws its counts on an independent substream of `seed`.
std::vector<ContingencyTable> generate_contin_table(
    const ContingencyTable& ref_table, const SignalMatrix& signal,
    const ZeroIndicator& zeros, std::size_t n_tables, std::uint64_t seed);

struct MetricSummary {
    double average_scaled = 0.0;
    double max_scaled = 0.0;
};

// Replication-based averages of the per-cell scaled transport distance:
// each replicate scores Scaled-Wasserstein_p at every signal cell from its
// draws, takes the mean and the max over those cells, and both statistics
// are then averaged over replicates.
MetricSummary aggregate_metrics(
    std::span<const PosteriorDraws> draws_per_replicate,
    const SignalMatrix& signal,
    std::span<const std::pair<std::size_t, std::size_t>> signal_cells, int p);

inline constexpr std::size_t kDefaultStudyReplicates = 50;

// Benchmark study over a grid of zero-inflation levels and signal
// strengths. Policies name how the shrinkage hyperparameter is chosen per
// replicate: "fix_<value>" pins it, "AIC"/"BIC" select over alpha_grid.
struct StudyConfig {
    std::vector<std::pair<std::size_t, std::size_t>> signal_cells;  // 0-based
    std::vector<double> lambda_grid;  // true strengths, each > 1
    std::vector<double> zi_grid;      // quantile levels in [0, 1)
    std::vector<double> alpha_grid{0.0, 0.3, 0.5, 0.7, 0.9};
    std::vector<std::string> policies{"fix_0", "fix_0.5", "fix_0.9", "AIC", "BIC"};
    std::size_t n_sim = kDefaultStudyReplicates;
    std::size_t draw_count = kDefaultDrawCount;
    ExpectedMethod expected = ExpectedMethod::marginal;
    std::uint64_t seed = 0;
};

// One tidy output row: metric_name is "Max_Scaled_RMSE" or
// "Ave_Scaled_RMSE" (the p = 2 transport distances).
struct StudyRecord {
    std::string policy;
    double zi = 0.0;
    double lambda = 0.0;
    std::string metric_name;
    double value = 0.0;
};

// Signal-cell draws retained from one replicate under one policy, in the
// exact stream order the study consumed them; enough to rebuild the
// replicate's metrics independently.
struct CapturedCellDraws {
    std::string policy;
    double zi = 0.0;
    double lambda = 0.0;
    std::size_t replicate = 0;
    std::size_t i = 0;
    std::size_t j = 0;
    std::vector<double> draws;
};

// For every (zi, lambda) configuration: generate n_sim tables, fit the
// gamma mixture at every alpha the policies need (one shared seeded start
// per replicate), draw the signal cells, and emit the replicate-averaged
// metrics per policy. Structural zeros come from the reference table's
// expected counts and never land on signal cells. Replicates run
// concurrently on per-replicate substreams. A non-null `capture` collects
// every signal-cell draw vector in zi -> lambda -> replicate -> policy ->
// cell order.
std::vector<StudyRecord> run_simulation_study(const ContingencyTable& ref_table,
                                              const StudyConfig& config,
                                              std::vector<CapturedCellDraws>* capture);
std::vector<StudyRecord> run_simulation_study(const ContingencyTable& ref_table,
                                              const StudyConfig& config);

}  // namespace ebsig

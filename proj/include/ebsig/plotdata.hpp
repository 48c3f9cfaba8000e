#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ebsig/serialize.hpp"

namespace ebsig {

// Knobs shared by both plot flavors. The text/aspect numbers are carried
// through to renderers untouched.
struct PlotOptions {
    int num_top_aes = 10;
    double cutoff = kDefaultDetectionCutoff;
    double prob = kDefaultDetectionProb;
    double level = 0.90;        // eyeplot credible-interval mass
    double n_threshold = 1.0;   // eyeplot: drop cells with N below this
    bool log_scale = false;
    double text_shift = 2.1;
    double text_size = 4.0;
    double x_lim_scalar = 1.2;
};

// Non-reference AE rows sorted descending by the row's largest closed-form
// scaled 2-Wasserstein distance between the cell posterior and the point
// mass at 1, taken over non-reference drugs. Ties keep table order.
std::vector<std::size_t> ae_order_by_signal(const LoadedFit& fit);

// Non-reference drug columns sorted descending by detected-signal count;
// ties keep table order.
std::vector<std::size_t> drug_order_by_detections(const LoadedFit& fit,
                                                  const DetectionResult& detection);

// Heatmap payload: for the top AEs, each non-reference drug's report count,
// null expected count, and posterior signal probability. num_top_aes is
// clamped to the available AE rows.
Json heatmap_data(const LoadedFit& fit, const PlotOptions& options = {});

// Eyeplot payload: posterior median and equi-tailed credible interval per
// cell, rows ordered like the heatmap, cells with N below the threshold
// dropped.
Json eyeplot_data(const LoadedFit& fit, const PlotOptions& options = {});

// Minimal static renderings for eyeballing the payloads.
std::string plot_svg(const Json& plot);

}  // namespace ebsig

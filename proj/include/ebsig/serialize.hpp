#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "ebsig/discrete.hpp"
#include "ebsig/ecm.hpp"
#include "ebsig/posterior.hpp"
#include "ebsig/selection.hpp"
#include "ebsig/table.hpp"

namespace ebsig {

using Json = nlohmann::ordered_json;

// FNV-1a 64 over the table's names and counts, as 16 hex digits. Stable
// across layouts and platforms; changing any name or count changes it.
std::string table_digest(const ContingencyTable& table);

Json table_to_json(const ContingencyTable& table);
ContingencyTable table_from_json(const Json& j);

// CSV with drug names in the header and AE names in the first column, the
// shape load_table reads back.
std::string table_csv(const ContingencyTable& table);

// Write via a sibling temp file and rename, so readers never observe a
// half-written artifact. DataError when the path cannot be written.
void write_text_atomic(const std::string& path, const std::string& content);
void write_json_atomic(const std::string& path, const Json& j);

// DataError on unreadable files or invalid JSON.
Json read_json_file(const std::string& path);

ExpectedMethod expected_method_from_name(const std::string& name);

// Fit artifacts embed the table and its expected counts so downstream
// commands are self-contained; the digest makes edits to the embedded
// table detectable on reload.
Json fit_to_json(const FitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected);
Json fit_to_json(const DiscreteFitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected);
Json fit_to_json(const EfronFitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected);

// A reloaded fit artifact: exactly one of the three fit members is set.
struct LoadedFit {
    std::string model;  // "gps" | "k_gamma" | "general_gamma" | "km" | "efron"
    ContingencyTable table;
    ExpectedCounts expected;
    bool converged = false;
    std::optional<FitResult> gamma;
    std::optional<DiscreteFitResult> km;
    std::optional<EfronFitResult> efron;

    DetectionResult detect(double cutoff = kDefaultDetectionCutoff,
                           double prob = kDefaultDetectionProb) const;
    PosteriorSummary summarize(double level = 0.90) const;
    CellPosterior cell(std::size_t i, std::size_t j) const;
    PosteriorDraws draws(std::size_t S, std::uint64_t seed) const;
};

// DataError on missing fields, wrong shapes, or a digest mismatch.
LoadedFit fit_from_json(const Json& j);
LoadedFit load_fit(const std::string& path);

// Matrix CSVs: drug names across the header, one row per AE.
std::string detection_csv(const DetectionResult& detection,
                          const ContingencyTable& table);
std::string matrix_csv(const Grid<double>& values, const ContingencyTable& table);

Json detection_to_json(const DetectionResult& detection,
                       const ContingencyTable& table);
Json summary_to_json(const PosteriorSummary& summary,
                     const ContingencyTable& table);
Json tune_report_to_json(const TuneReport& report);

}  // namespace ebsig

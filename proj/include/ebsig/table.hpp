#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ebsig/grid.hpp"

namespace ebsig {

// I x J report-count table. The last row aggregates all other adverse
// events and the last column all other drugs; both serve as the reference
// margin for the subtable baseline.
struct ContingencyTable {
    Grid<std::int64_t> counts{0, 0, 0};
    std::vector<std::string> ae_names;
    std::vector<std::string> drug_names;

    std::size_t n_rows() const { return counts.rows(); }
    std::size_t n_cols() const { return counts.cols(); }

    std::int64_t row_total(std::size_t i) const;
    std::int64_t col_total(std::size_t j) const;
    std::int64_t grand_total() const;

    // Throws DataError if shapes/names/counts violate the contract
    // (I,J >= 2, names unique and matching the matrix, counts >= 0).
    void validate() const;
};

enum class ExpectedMethod { marginal, subtable };

struct ExpectedCounts {
    Grid<double> values{0, 0, 0.0};
    ExpectedMethod method = ExpectedMethod::marginal;
};

// CSV with drug names in the header (first field ignored) and AE names in
// the first column. Comma-separated; surrounding quotes on fields are
// stripped, embedded commas are not supported.
ContingencyTable load_table(const std::string& path);
ContingencyTable parse_table(std::istream& in, const std::string& origin);

// Keep the named AE rows (in table order) and fold every other row --
// including the old reference row -- into a new final row labeled
// reference_label. Column sums are unchanged.
ContingencyTable collapse_rows(const ContingencyTable& table,
                               const std::vector<std::string>& keep,
                               const std::string& reference_label);

// Move the named row and/or column to the last position (empty name = leave
// as is), preserving the relative order of the others.
ContingencyTable set_reference(const ContingencyTable& table,
                               const std::string& reference_row,
                               const std::string& reference_col);

// Null baselines: marginal E_ij = N_i. * N_.j / N_.. ; subtable uses the
// reference margin, E_ij = N_iJ * N_Ij / N_IJ, making N_ij/E_ij the sample
// odds ratio against the reference row/column.
ExpectedCounts estimate_null_expected_count(const ContingencyTable& table,
                                            ExpectedMethod method);

const char* expected_method_name(ExpectedMethod method);

}  // namespace ebsig

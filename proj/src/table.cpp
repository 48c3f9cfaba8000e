#include "ebsig/table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ebsig/errors.hpp"

namespace ebsig {

namespace {

std::string trim_field(std::string s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && is_space(s.back())) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && is_space(s[b])) ++b;
    s.erase(0, b);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim_field(line.substr(start)));
            return out;
        }
        out.push_back(trim_field(line.substr(start, pos - start)));
        start = pos + 1;
    }
}

std::int64_t parse_count(const std::string& field, const std::string& origin,
                         const std::string& ae, const std::string& drug) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || value < 0)
        throw DataError(origin + ": cell (" + ae + ", " + drug + "): '" + field +
                        "' is not a nonnegative integer");
    return value;
}

void check_unique(const std::vector<std::string>& names, const char* axis,
                  const std::string& origin) {
    std::unordered_set<std::string> seen;
    for (const auto& name : names)
        if (!seen.insert(name).second)
            throw DataError(origin + ": duplicate " + axis + " name '" + name + "'");
}

}  // namespace

std::int64_t ContingencyTable::row_total(std::size_t i) const {
    std::int64_t acc = 0;
    for (std::size_t j = 0; j < n_cols(); ++j) acc += counts(i, j);
    return acc;
}

std::int64_t ContingencyTable::col_total(std::size_t j) const {
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < n_rows(); ++i) acc += counts(i, j);
    return acc;
}

std::int64_t ContingencyTable::grand_total() const {
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < n_rows(); ++i) acc += row_total(i);
    return acc;
}

void ContingencyTable::validate() const {
    if (n_rows() < 2 || n_cols() < 2)
        throw DataError("table must have at least 2 rows and 2 columns, got " +
                        std::to_string(n_rows()) + "x" + std::to_string(n_cols()));
    if (ae_names.size() != n_rows() || drug_names.size() != n_cols())
        throw DataError("table name lists do not match the count matrix shape");
    check_unique(ae_names, "AE", "table");
    check_unique(drug_names, "drug", "table");
    for (std::size_t i = 0; i < n_rows(); ++i)
        for (std::size_t j = 0; j < n_cols(); ++j)
            if (counts(i, j) < 0)
                throw DataError("negative count at (" + ae_names[i] + ", " +
                                drug_names[j] + ")");
}

ContingencyTable parse_table(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line))
        throw DataError(origin + ": empty file");
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 3)
        throw DataError(origin + ": header must name at least 2 drug columns");

    ContingencyTable table;
    table.drug_names.assign(header.begin() + 1, header.end());
    const std::size_t cols = table.drug_names.size();

    std::vector<std::int64_t> values;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim_field(line).empty()) continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != cols + 1)
            throw DataError(origin + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(cols + 1));
        table.ae_names.push_back(fields[0]);
        for (std::size_t j = 0; j < cols; ++j)
            values.push_back(parse_count(fields[j + 1], origin, fields[0],
                                         table.drug_names[j]));
    }

    const std::size_t rows = table.ae_names.size();
    table.counts = Grid<std::int64_t>(rows, cols, 0);
    std::copy(values.begin(), values.end(), table.counts.data());

    check_unique(table.ae_names, "AE", origin);
    check_unique(table.drug_names, "drug", origin);
    table.validate();
    return table;
}

ContingencyTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open table file: " + path);
    return parse_table(in, path);
}

ContingencyTable collapse_rows(const ContingencyTable& table,
                               const std::vector<std::string>& keep,
                               const std::string& reference_label) {
    if (keep.empty()) throw DataError("collapse_rows: empty keep list");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < table.n_rows(); ++i) index.emplace(table.ae_names[i], i);

    std::unordered_set<std::string> keep_set;
    for (const auto& name : keep) {
        if (!index.count(name))
            throw DataError("collapse_rows: unknown AE name '" + name + "'");
        if (index.at(name) + 1 == table.n_rows())
            throw DataError("collapse_rows: keep list may not include the reference row '" +
                            name + "'");
        if (!keep_set.insert(name).second)
            throw DataError("collapse_rows: duplicate keep name '" + name + "'");
    }

    const std::size_t cols = table.n_cols();
    ContingencyTable out;
    out.drug_names = table.drug_names;
    out.counts = Grid<std::int64_t>(keep_set.size() + 1, cols, 0);

    std::size_t next = 0;
    std::vector<std::int64_t> rest(cols, 0);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        if (keep_set.count(table.ae_names[i])) {
            out.ae_names.push_back(table.ae_names[i]);
            for (std::size_t j = 0; j < cols; ++j) out.counts(next, j) = table.counts(i, j);
            ++next;
        } else {
            for (std::size_t j = 0; j < cols; ++j) rest[j] += table.counts(i, j);
        }
    }
    out.ae_names.push_back(reference_label);
    for (std::size_t j = 0; j < cols; ++j) out.counts(next, j) = rest[j];
    out.validate();
    return out;
}

ContingencyTable set_reference(const ContingencyTable& table,
                               const std::string& reference_row,
                               const std::string& reference_col) {
    std::vector<std::size_t> row_order(table.n_rows()), col_order(table.n_cols());
    for (std::size_t i = 0; i < row_order.size(); ++i) row_order[i] = i;
    for (std::size_t j = 0; j < col_order.size(); ++j) col_order[j] = j;

    const auto move_last = [](std::vector<std::size_t>& order,
                              const std::vector<std::string>& names,
                              const std::string& want, const char* axis) {
        if (want.empty()) return;
        const auto it = std::find(names.begin(), names.end(), want);
        if (it == names.end())
            throw DataError(std::string("unknown ") + axis + " name '" + want + "'");
        const std::size_t idx = static_cast<std::size_t>(it - names.begin());
        order.erase(std::find(order.begin(), order.end(), idx));
        order.push_back(idx);
    };
    move_last(row_order, table.ae_names, reference_row, "AE");
    move_last(col_order, table.drug_names, reference_col, "drug");

    ContingencyTable out;
    out.counts = Grid<std::int64_t>(table.n_rows(), table.n_cols(), 0);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        out.ae_names.push_back(table.ae_names[row_order[i]]);
        for (std::size_t j = 0; j < table.n_cols(); ++j)
            out.counts(i, j) = table.counts(row_order[i], col_order[j]);
    }
    for (std::size_t j = 0; j < table.n_cols(); ++j)
        out.drug_names.push_back(table.drug_names[col_order[j]]);
    return out;
}

ExpectedCounts estimate_null_expected_count(const ContingencyTable& table,
                                            ExpectedMethod method) {
    const std::size_t rows = table.n_rows();
    const std::size_t cols = table.n_cols();
    ExpectedCounts out;
    out.method = method;
    out.values = Grid<double>(rows, cols, 0.0);

    if (method == ExpectedMethod::marginal) {
        const double grand = static_cast<double>(table.grand_total());
        if (grand <= 0) throw DataError("marginal baseline: table total is zero");
        for (std::size_t i = 0; i < rows; ++i)
            if (table.row_total(i) == 0)
                throw DataError("marginal baseline: row total is zero for AE '" +
                                table.ae_names[i] +
                                "'; collapse it into the reference row first");
        for (std::size_t j = 0; j < cols; ++j)
            if (table.col_total(j) == 0)
                throw DataError("marginal baseline: column total is zero for drug '" +
                                table.drug_names[j] + "'; drop or merge the column first");
        for (std::size_t i = 0; i < rows; ++i) {
            const double ri = static_cast<double>(table.row_total(i));
            for (std::size_t j = 0; j < cols; ++j)
                out.values(i, j) = ri * static_cast<double>(table.col_total(j)) / grand;
        }
        return out;
    }

    const std::size_t ref_i = rows - 1;
    const std::size_t ref_j = cols - 1;
    const double corner = static_cast<double>(table.counts(ref_i, ref_j));
    if (corner <= 0)
        throw DataError("subtable baseline: reference corner count is zero; "
                        "use the marginal baseline or collapse more rows");
    for (std::size_t i = 0; i < rows; ++i)
        if (table.counts(i, ref_j) == 0)
            throw DataError("subtable baseline: reference-column count is zero for AE '" +
                            table.ae_names[i] +
                            "'; use the marginal baseline or collapse this row");
    for (std::size_t j = 0; j < cols; ++j)
        if (table.counts(ref_i, j) == 0)
            throw DataError("subtable baseline: reference-row count is zero for drug '" +
                            table.drug_names[j] + "'; use the marginal baseline");
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out.values(i, j) = static_cast<double>(table.counts(i, ref_j)) *
                               static_cast<double>(table.counts(ref_i, j)) / corner;
    return out;
}

const char* expected_method_name(ExpectedMethod method) {
    return method == ExpectedMethod::marginal ? "marginal" : "subtable";
}

}  // namespace ebsig

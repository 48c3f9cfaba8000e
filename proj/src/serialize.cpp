#include "ebsig/serialize.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "ebsig/errors.hpp"
#include "ebsig/spline.hpp"

namespace ebsig {

namespace {

constexpr char kFitFormat[] = "ebsig-fit/1";

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < n; ++k) {
        h ^= p[k];
        h *= 0x100000001b3ULL;
    }
}

void fnv_string(std::uint64_t& h, const std::string& s) {
    fnv_bytes(h, s.data(), s.size());
    const unsigned char sep = 0x1f;
    fnv_bytes(h, &sep, 1);
}

std::vector<double> doubles_from(const Json& j, const char* what) {
    if (!j.is_array()) throw DataError(std::string(what) + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw DataError(std::string(what) + " must be numeric");
        out.push_back(v.get<double>());
    }
    return out;
}

const Json& field(const Json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end())
        throw DataError(std::string("fit file is missing the '") + name + "' field");
    return *it;
}

Json grid_to_json(const Grid<double>& grid) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < grid.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < grid.cols(); ++j) row.push_back(grid(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Grid<double> grid_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.empty())
        throw DataError(std::string(what) + " must be a nonempty array of rows");
    const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
    if (cols == 0) throw DataError(std::string(what) + " rows must be nonempty arrays");
    Grid<double> out(j.size(), cols, 0.0);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != cols)
            throw DataError(std::string(what) + " rows must all have equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number())
                throw DataError(std::string(what) + " entries must be numeric");
            out(i, c) = row[c].get<double>();
        }
    }
    return out;
}

// Shared frame: format tag, baseline, embedded table + digest, expected.
Json fit_frame(const std::string& model, const ContingencyTable& table,
               const ExpectedCounts& expected, bool converged,
               std::size_t iterations, double log_marginal) {
    if (!expected.values.same_shape(table.counts))
        throw UsageError("expected counts must match the table shape");
    Json j;
    j["format"] = kFitFormat;
    j["model"] = model;
    j["baseline"] = expected_method_name(expected.method);
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["log_marginal"] = log_marginal;
    j["table"] = table_to_json(table);
    j["table_digest"] = table_digest(table);
    j["expected"] = grid_to_json(expected.values);
    return j;
}

void load_frame(const Json& j, LoadedFit& out) {
    out.model = field(j, "model").get<std::string>();
    out.converged = field(j, "converged").get<bool>();
    out.table = table_from_json(field(j, "table"));
    const std::string digest = field(j, "table_digest").get<std::string>();
    if (digest != table_digest(out.table))
        throw DataError(
            "embedded table does not match its digest; the fit file was "
            "modified after it was written");
    out.expected.values = grid_from_json(field(j, "expected"), "expected");
    out.expected.method = expected_method_from_name(field(j, "baseline").get<std::string>());
    if (!out.expected.values.same_shape(out.table.counts))
        throw DataError("expected counts do not match the embedded table shape");
}

std::string csv_matrix(const ContingencyTable& table,
                       const std::function<std::string(std::size_t, std::size_t)>& cell) {
    std::string out = "ae";
    for (const std::string& drug : table.drug_names) {
        out += ',';
        out += drug;
    }
    out += '\n';
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        out += table.ae_names[i];
        for (std::size_t j = 0; j < table.n_cols(); ++j) {
            out += ',';
            out += cell(i, j);
        }
        out += '\n';
    }
    return out;
}

std::string full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string table_digest(const ContingencyTable& table) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const std::string& name : table.ae_names) fnv_string(h, name);
    for (const std::string& name : table.drug_names) fnv_string(h, name);
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        for (std::size_t j = 0; j < table.n_cols(); ++j) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "%" PRId64 ",", table.counts(i, j));
            fnv_bytes(h, buf, std::char_traits<char>::length(buf));
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016" PRIx64, h);
    return out;
}

Json table_to_json(const ContingencyTable& table) {
    Json j;
    j["ae_names"] = table.ae_names;
    j["drug_names"] = table.drug_names;
    Json rows = Json::array();
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        Json row = Json::array();
        for (std::size_t c = 0; c < table.n_cols(); ++c)
            row.push_back(table.counts(i, c));
        rows.push_back(std::move(row));
    }
    j["counts"] = std::move(rows);
    return j;
}

ContingencyTable table_from_json(const Json& j) {
    ContingencyTable table;
    for (const auto& name : field(j, "ae_names"))
        table.ae_names.push_back(name.get<std::string>());
    for (const auto& name : field(j, "drug_names"))
        table.drug_names.push_back(name.get<std::string>());
    const Json& counts = field(j, "counts");
    if (!counts.is_array() || counts.empty())
        throw DataError("counts must be a nonempty array of rows");
    const std::size_t cols = counts.front().is_array() ? counts.front().size() : 0;
    if (cols == 0) throw DataError("counts rows must be nonempty arrays");
    table.counts = Grid<std::int64_t>(counts.size(), cols, 0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto& row = counts[i];
        if (!row.is_array() || row.size() != cols)
            throw DataError("counts rows must all have equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number_integer())
                throw DataError("counts must be integers");
            table.counts(i, c) = row[c].get<std::int64_t>();
        }
    }
    table.validate();
    return table;
}

std::string table_csv(const ContingencyTable& table) {
    std::string out = "ae";
    for (const std::string& drug : table.drug_names) {
        out += ',';
        out += drug;
    }
    out += '\n';
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        out += table.ae_names[i];
        for (std::size_t j = 0; j < table.n_cols(); ++j)
            out += ',' + std::to_string(table.counts(i, j));
        out += '\n';
    }
    return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw DataError("cannot write to '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw DataError("cannot move temporary file onto '" + path + "'");
    }
}

void write_json_atomic(const std::string& path, const Json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("'" + path + "' is not valid JSON");
    return j;
}

ExpectedMethod expected_method_from_name(const std::string& name) {
    if (name == "marginal") return ExpectedMethod::marginal;
    if (name == "subtable") return ExpectedMethod::subtable;
    throw DataError("unknown baseline '" + name + "'; expected marginal or subtable");
}

Json fit_to_json(const FitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected) {
    Json j = fit_frame(fit.model, table, expected, fit.converged, fit.iterations,
                       fit.log_marginal);
    j["seed"] = fit.seed;
    j["alpha"] = fit.alpha;
    j["k_star"] = fit.K_star;
    j["aic"] = aic_general_gamma(fit);
    j["bic"] = bic_general_gamma(fit, table);
    j["weights"] = fit.prior.weights;
    j["shapes"] = fit.prior.shapes;
    j["scales"] = fit.prior.scales;
    return j;
}

Json fit_to_json(const DiscreteFitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected) {
    Json j = fit_frame(fit.model, table, expected, fit.converged, fit.iterations,
                       fit.log_marginal);
    j["kkt_residual"] = fit.kkt_residual;
    j["support"] = fit.prior.support;
    j["masses"] = fit.prior.masses;
    return j;
}

Json fit_to_json(const EfronFitResult& fit, const ContingencyTable& table,
                 const ExpectedCounts& expected) {
    Json j = fit_frame(fit.model, table, expected, fit.converged, fit.iterations,
                       fit.log_marginal);
    j["dof"] = fit.prior.dof();
    j["penalty"] = fit.prior.penalty;
    j["gradient_norm"] = fit.gradient_norm;
    j["penalized_objective"] = fit.penalized_objective;
    j["log_normalizer"] = fit.prior.log_normalizer;
    try {
        j["edf"] = efron_effective_dof(fit, table, expected);
        j["aic"] = efron_aic(fit, table, expected);
    } catch (const NumericalError&) {
        // Indefinite curvature at the optimum: leave the scores out rather
        // than storing something untrustworthy.
    }
    std::vector<double> coefficients(fit.prior.coefficients.data(),
                                     fit.prior.coefficients.data() +
                                         fit.prior.coefficients.size());
    j["coefficients"] = coefficients;
    j["support"] = fit.prior.support;
    j["masses"] = fit.prior.masses;
    return j;
}

DetectionResult LoadedFit::detect(double cutoff, double prob) const {
    if (gamma) return detect_signals(*gamma, table, expected, cutoff, prob);
    if (km) return detect_signals(*km, table, expected, cutoff, prob);
    return detect_signals(*efron, table, expected, cutoff, prob);
}

PosteriorSummary LoadedFit::summarize(double level) const {
    if (gamma) return posterior_summary(*gamma, table, expected, level);
    if (km) return posterior_summary(*km, table, expected, level);
    return posterior_summary(*efron, table, expected, level);
}

CellPosterior LoadedFit::cell(std::size_t i, std::size_t j) const {
    if (gamma) return cell_posterior(*gamma, table, expected, i, j);
    if (km) return cell_posterior(*km, table, expected, i, j);
    return cell_posterior(*efron, table, expected, i, j);
}

PosteriorDraws LoadedFit::draws(std::size_t S, std::uint64_t seed) const {
    if (gamma) return posterior_draws(*gamma, table, expected, S, seed);
    if (km) return posterior_draws(*km, table, expected, S, seed);
    return posterior_draws(*efron, table, expected, S, seed);
}

LoadedFit fit_from_json(const Json& j) {
    if (!j.is_object() || field(j, "format").get<std::string>() != kFitFormat)
        throw DataError("not an ebsig fit file");
    LoadedFit out;
    load_frame(j, out);
    const double log_marginal = field(j, "log_marginal").get<double>();
    const auto iterations = field(j, "iterations").get<std::size_t>();
    if (out.model == "gps" || out.model == "k_gamma" ||
        out.model == "general_gamma") {
        FitResult fit;
        fit.model = out.model;
        fit.alpha = field(j, "alpha").get<double>();
        fit.log_marginal = log_marginal;
        fit.K_star = field(j, "k_star").get<std::size_t>();
        fit.converged = out.converged;
        fit.iterations = iterations;
        fit.seed = field(j, "seed").get<std::uint64_t>();
        fit.prior.weights = doubles_from(field(j, "weights"), "weights");
        fit.prior.shapes = doubles_from(field(j, "shapes"), "shapes");
        fit.prior.scales = doubles_from(field(j, "scales"), "scales");
        fit.prior.validate();
        out.gamma = std::move(fit);
    } else if (out.model == "km") {
        DiscreteFitResult fit;
        fit.model = out.model;
        fit.log_marginal = log_marginal;
        fit.kkt_residual = field(j, "kkt_residual").get<double>();
        fit.converged = out.converged;
        fit.iterations = static_cast<int>(iterations);
        fit.prior.support = doubles_from(field(j, "support"), "support");
        fit.prior.masses = doubles_from(field(j, "masses"), "masses");
        fit.prior.validate();
        out.km = std::move(fit);
    } else if (out.model == "efron") {
        EfronFitResult fit;
        fit.model = out.model;
        fit.log_marginal = log_marginal;
        fit.converged = out.converged;
        fit.iterations = static_cast<int>(iterations);
        fit.gradient_norm = field(j, "gradient_norm").get<double>();
        fit.penalized_objective = field(j, "penalized_objective").get<double>();
        fit.prior.support = doubles_from(field(j, "support"), "support");
        fit.prior.masses = doubles_from(field(j, "masses"), "masses");
        fit.prior.penalty = field(j, "penalty").get<double>();
        fit.prior.log_normalizer = field(j, "log_normalizer").get<double>();
        const auto coefficients =
            doubles_from(field(j, "coefficients"), "coefficients");
        fit.prior.coefficients =
            Eigen::Map<const Eigen::VectorXd>(coefficients.data(),
                                              static_cast<Eigen::Index>(coefficients.size()));
        // The spline design is a pure function of the support and rank, so
        // rebuilding it reproduces the stored fit exactly.
        fit.prior.basis = natural_spline_basis(fit.prior.support,
                                               field(j, "dof").get<int>());
        fit.prior.validate();
        out.efron = std::move(fit);
    } else {
        throw DataError("unknown model '" + out.model + "' in fit file");
    }
    return out;
}

LoadedFit load_fit(const std::string& path) {
    return fit_from_json(read_json_file(path));
}

std::string detection_csv(const DetectionResult& detection,
                          const ContingencyTable& table) {
    if (!detection.detected.same_shape(table.counts))
        throw UsageError("detection matrix must match the table shape");
    return csv_matrix(table, [&](std::size_t i, std::size_t j) {
        return std::string(detection.detected(i, j) ? "1" : "0");
    });
}

std::string matrix_csv(const Grid<double>& values, const ContingencyTable& table) {
    if (!values.same_shape(table.counts))
        throw UsageError("matrix must match the table shape");
    return csv_matrix(table,
                      [&](std::size_t i, std::size_t j) { return full(values(i, j)); });
}

Json detection_to_json(const DetectionResult& detection,
                       const ContingencyTable& table) {
    if (!detection.detected.same_shape(table.counts))
        throw UsageError("detection matrix must match the table shape");
    Json j;
    j["ae_names"] = table.ae_names;
    j["drug_names"] = table.drug_names;
    j["cutoff"] = detection.cutoff;
    j["prob"] = detection.prob;
    j["count"] = detection.count();
    Json rows = Json::array();
    Json probs = Json::array();
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        Json row = Json::array();
        Json prow = Json::array();
        for (std::size_t c = 0; c < table.n_cols(); ++c) {
            row.push_back(detection.detected(i, c) ? 1 : 0);
            prow.push_back(detection.probability(i, c));
        }
        rows.push_back(std::move(row));
        probs.push_back(std::move(prow));
    }
    j["detected"] = std::move(rows);
    j["probability"] = std::move(probs);
    return j;
}

Json summary_to_json(const PosteriorSummary& summary,
                     const ContingencyTable& table) {
    if (!summary.median.same_shape(table.counts))
        throw UsageError("summary matrices must match the table shape");
    Json j;
    j["ae_names"] = table.ae_names;
    j["drug_names"] = table.drug_names;
    j["level"] = summary.level;
    j["median"] = grid_to_json(summary.median);
    j["lower"] = grid_to_json(summary.lower);
    j["upper"] = grid_to_json(summary.upper);
    return j;
}

Json tune_report_to_json(const TuneReport& report) {
    Json j;
    j["model"] = report.model;
    j["selected_by_aic"] = report.selected_by_aic;
    j["selected_by_bic"] = report.selected_by_bic;
    Json rows = Json::array();
    for (const TuneRow& row : report.rows) {
        Json r;
        if (report.model == "general_gamma") {
            r["alpha"] = row.alpha;
        } else {
            r["dof"] = row.dof;
            r["penalty"] = row.penalty;
        }
        r["aic"] = row.aic;
        r["bic"] = row.bic;
        r["complexity"] = row.complexity;
        r["log_marginal"] = row.log_marginal;
        r["converged"] = row.converged;
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    return j;
}

}  // namespace ebsig

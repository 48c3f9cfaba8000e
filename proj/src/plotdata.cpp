#include "ebsig/plotdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ebsig/errors.hpp"

namespace ebsig {

namespace {

constexpr char kPlotFormat[] = "ebsig-plot/1";

void check_shape(const LoadedFit& fit) {
    if (fit.table.n_rows() < 2 || fit.table.n_cols() < 2)
        throw DataError("plots need at least one non-reference row and column");
}

void check_options(const PlotOptions& options) {
    if (options.num_top_aes < 1)
        throw UsageError("number of top AEs must be at least 1");
    if (!(options.cutoff > 1.0))
        throw UsageError("signal cutoff must exceed 1");
    if (!(options.prob > 0.0 && options.prob < 1.0))
        throw UsageError("signal probability threshold must lie in (0, 1)");
    if (!(options.level > 0.0 && options.level < 1.0))
        throw UsageError("credible level must lie in (0, 1)");
    if (!(options.n_threshold >= 0.0))
        throw UsageError("count threshold must be nonnegative");
}

// Descending stable order of `scores`, as indices.
std::vector<std::size_t> order_desc(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<std::string> names_at(const std::vector<std::string>& names,
                                  const std::vector<std::size_t>& order,
                                  std::size_t take) {
    std::vector<std::string> out;
    out.reserve(take);
    for (std::size_t k = 0; k < take; ++k) out.push_back(names[order[k]]);
    return out;
}

std::string fmt(const char* spec, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string heatmap_svg(const Json& plot) {
    const auto& aes = plot.at("ae_order");
    const auto& drugs = plot.at("drug_order");
    const auto& cells = plot.at("cells");
    const double left = 220, top = 90, cw = 130, ch = 36;
    const double width = left + cw * static_cast<double>(drugs.size()) + 20;
    const double height = top + ch * static_cast<double>(aes.size()) + 20;
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) +
        "\" height=\"" + fmt("%.0f", height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t j = 0; j < drugs.size(); ++j) {
        const double x = left + cw * (static_cast<double>(j) + 0.5);
        svg += "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", top - 10) +
               "\" text-anchor=\"middle\">" +
               xml_escape(drugs[j].get<std::string>()) + "</text>\n";
    }
    for (std::size_t i = 0; i < aes.size(); ++i) {
        const double y = top + ch * (static_cast<double>(i) + 0.5);
        svg += "<text x=\"" + fmt("%.1f", left - 8) + "\" y=\"" + fmt("%.1f", y + 4) +
               "\" text-anchor=\"end\">" + xml_escape(aes[i].get<std::string>()) +
               "</text>\n";
    }
    for (const auto& cell : cells) {
        std::size_t i = 0, j = 0;
        while (i < aes.size() && aes[i].get<std::string>() != cell.at("ae")) ++i;
        while (j < drugs.size() && drugs[j].get<std::string>() != cell.at("drug")) ++j;
        const double p = cell.at("prob_signal").get<double>();
        const double x = left + cw * static_cast<double>(j);
        const double y = top + ch * static_cast<double>(i);
        const int shade = static_cast<int>(std::lround(255.0 * (1.0 - p)));
        svg += "<rect x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", y) +
               "\" width=\"" + fmt("%.1f", cw - 2) + "\" height=\"" +
               fmt("%.1f", ch - 2) + "\" fill=\"rgb(" + std::to_string(shade) + "," +
               std::to_string(shade) + ",255)\" stroke=\"#888\"/>\n";
        svg += "<text x=\"" + fmt("%.1f", x + (cw - 2) / 2) + "\" y=\"" +
               fmt("%.1f", y + ch / 2 + 4) + "\" text-anchor=\"middle\" fill=\"" +
               (p > 0.6 ? "white" : "black") + "\">" +
               fmt("%.6g", cell.at("N").get<double>()) + " | " +
               fmt("%.3g", cell.at("E").get<double>()) + " | " + fmt("%.2f", p) +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::string eyeplot_svg(const Json& plot) {
    const auto& cells = plot.at("cells");
    const bool log_scale = plot.at("log_scale").get<bool>();
    const double x_lim_scalar = plot.at("x_lim_scalar").get<double>();
    double hi_max = 1.0, lo_min = log_scale ? 1.0 : 0.0;
    for (const auto& cell : cells) {
        hi_max = std::max(hi_max, cell.at("hi").get<double>());
        if (log_scale) lo_min = std::min(lo_min, cell.at("lo").get<double>());
    }
    const auto coord = [&](double v) {
        if (!log_scale) return v;
        return std::log(std::max(v, 1e-12));
    };
    const double x0 = coord(log_scale ? std::max(lo_min, 1e-12) : 0.0);
    const double x1 = coord(hi_max) * (log_scale ? 1.0 : x_lim_scalar) +
                      (log_scale ? std::log(x_lim_scalar) : 0.0);
    const double left = 280, top = 40, rh = 26, plot_w = 520;
    const double width = left + plot_w + 180;
    const double height = top + rh * static_cast<double>(cells.size()) + 30;
    const auto to_x = [&](double v) {
        if (x1 <= x0) return left;
        return left + plot_w * (coord(v) - x0) / (x1 - x0);
    };
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", width) +
        "\" height=\"" + fmt("%.0f", height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<line x1=\"" + fmt("%.1f", to_x(1.0)) + "\" y1=\"" + fmt("%.1f", top - 16) +
           "\" x2=\"" + fmt("%.1f", to_x(1.0)) + "\" y2=\"" +
           fmt("%.1f", height - 20) +
           "\" stroke=\"red\" stroke-dasharray=\"4,3\"/>\n";
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto& cell = cells[r];
        const double y = top + rh * (static_cast<double>(r) + 0.5);
        svg += "<text x=\"" + fmt("%.1f", left - 8) + "\" y=\"" + fmt("%.1f", y + 4) +
               "\" text-anchor=\"end\">" +
               xml_escape(cell.at("ae").get<std::string>()) + " / " +
               xml_escape(cell.at("drug").get<std::string>()) + "</text>\n";
        const double lo = to_x(cell.at("lo").get<double>());
        const double hi = to_x(cell.at("hi").get<double>());
        const double med = to_x(cell.at("median").get<double>());
        svg += "<line x1=\"" + fmt("%.1f", lo) + "\" y1=\"" + fmt("%.1f", y) +
               "\" x2=\"" + fmt("%.1f", hi) + "\" y2=\"" + fmt("%.1f", y) +
               "\" stroke=\"steelblue\" stroke-width=\"3\"/>\n";
        svg += "<circle cx=\"" + fmt("%.1f", med) + "\" cy=\"" + fmt("%.1f", y) +
               "\" r=\"4\" fill=\"navy\"/>\n";
        svg += "<text x=\"" + fmt("%.1f", left + plot_w + 12) + "\" y=\"" +
               fmt("%.1f", y + 4) + "\">N=" + fmt("%.6g", cell.at("N").get<double>()) +
               " E=" + fmt("%.3g", cell.at("E").get<double>()) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace

std::vector<std::size_t> ae_order_by_signal(const LoadedFit& fit) {
    check_shape(fit);
    const std::size_t rows = fit.table.n_rows() - 1;
    const std::size_t cols = fit.table.n_cols() - 1;
    std::vector<double> scores(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            scores[i] = std::max(scores[i], scaled_wasserstein(fit.cell(i, j), 1.0, 2));
    return order_desc(scores);
}

std::vector<std::size_t> drug_order_by_detections(const LoadedFit& fit,
                                                  const DetectionResult& detection) {
    check_shape(fit);
    const std::size_t rows = fit.table.n_rows() - 1;
    const std::size_t cols = fit.table.n_cols() - 1;
    std::vector<double> counts(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i)
            if (detection.detected(i, j)) counts[j] += 1.0;
    return order_desc(counts);
}

Json heatmap_data(const LoadedFit& fit, const PlotOptions& options) {
    check_shape(fit);
    check_options(options);
    const DetectionResult detection = fit.detect(options.cutoff, options.prob);
    const std::vector<std::size_t> ae_order = ae_order_by_signal(fit);
    const std::vector<std::size_t> drug_order =
        drug_order_by_detections(fit, detection);
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(options.num_top_aes),
                              ae_order.size());
    Json j;
    j["format"] = kPlotFormat;
    j["type"] = "heatmap";
    j["model"] = fit.model;
    j["cutoff"] = options.cutoff;
    j["prob"] = options.prob;
    j["num_top_aes"] = take;
    j["ae_order"] = names_at(fit.table.ae_names, ae_order, take);
    j["drug_order"] =
        names_at(fit.table.drug_names, drug_order, drug_order.size());
    Json cells = Json::array();
    for (std::size_t a = 0; a < take; ++a) {
        const std::size_t i = ae_order[a];
        for (std::size_t d : drug_order) {
            Json cell;
            cell["ae"] = fit.table.ae_names[i];
            cell["drug"] = fit.table.drug_names[d];
            cell["N"] = static_cast<double>(fit.table.counts(i, d));
            cell["E"] = fit.expected.values(i, d);
            cell["prob_signal"] = detection.probability(i, d);
            cells.push_back(std::move(cell));
        }
    }
    j["cells"] = std::move(cells);
    return j;
}

Json eyeplot_data(const LoadedFit& fit, const PlotOptions& options) {
    check_shape(fit);
    check_options(options);
    const PosteriorSummary summary = fit.summarize(options.level);
    const std::vector<std::size_t> ae_order = ae_order_by_signal(fit);
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(options.num_top_aes),
                              ae_order.size());
    Json j;
    j["format"] = kPlotFormat;
    j["type"] = "eyeplot";
    j["model"] = fit.model;
    j["level"] = options.level;
    j["num_top_aes"] = take;
    j["n_threshold"] = options.n_threshold;
    j["log_scale"] = options.log_scale;
    j["text_shift"] = options.text_shift;
    j["text_size"] = options.text_size;
    j["x_lim_scalar"] = options.x_lim_scalar;
    j["ae_order"] = names_at(fit.table.ae_names, ae_order, take);
    Json cells = Json::array();
    const std::size_t cols = fit.table.n_cols() - 1;
    for (std::size_t a = 0; a < take; ++a) {
        const std::size_t i = ae_order[a];
        for (std::size_t d = 0; d < cols; ++d) {
            if (static_cast<double>(fit.table.counts(i, d)) < options.n_threshold)
                continue;
            Json cell;
            cell["ae"] = fit.table.ae_names[i];
            cell["drug"] = fit.table.drug_names[d];
            cell["N"] = static_cast<double>(fit.table.counts(i, d));
            cell["E"] = fit.expected.values(i, d);
            cell["median"] = summary.median(i, d);
            cell["lo"] = summary.lower(i, d);
            cell["hi"] = summary.upper(i, d);
            cells.push_back(std::move(cell));
        }
    }
    j["cells"] = std::move(cells);
    return j;
}

std::string plot_svg(const Json& plot) {
    const std::string type = plot.at("type").get<std::string>();
    if (type == "heatmap") return heatmap_svg(plot);
    if (type == "eyeplot") return eyeplot_svg(plot);
    throw UsageError("unknown plot type '" + type + "'");
}

}  // namespace ebsig

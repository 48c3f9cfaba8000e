#include "ebsig/spline.hpp"

#include <algorithm>
#include <cmath>

#include "ebsig/errors.hpp"
#include "ebsig/quantile.hpp"

namespace ebsig {
namespace {

std::vector<double> make_knots(std::span<const double> values, int dof) {
    if (dof < 2) throw UsageError("spline basis needs at least 2 degrees of freedom");
    if (static_cast<std::size_t>(dof) >= values.size())
        throw UsageError("spline degrees of freedom must be below the number of support points");
    std::vector<double> logs(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0) || !std::isfinite(values[i]))
            throw UsageError("spline basis requires strictly positive support values");
        logs[i] = std::log(values[i]);
    }
    std::sort(logs.begin(), logs.end());
    std::vector<double> knots(static_cast<std::size_t>(dof) + 1);
    for (int j = 0; j <= dof; ++j)
        knots[static_cast<std::size_t>(j)] = type7_quantile(logs, static_cast<double>(j) / dof);
    for (std::size_t j = 1; j < knots.size(); ++j)
        if (!(knots[j] > knots[j - 1]))
            throw UsageError("spline knots collapsed; support values are too close to distinct quantiles");
    return knots;
}

// Second derivatives of the natural cubic interpolant of y at knots t
// (natural boundary: zero curvature at both ends).
std::vector<double> natural_second_derivs(const std::vector<double>& t,
                                          const std::vector<double>& y) {
    const std::size_t m = t.size();
    std::vector<double> curv(m, 0.0);
    if (m < 3) return curv;
    const std::size_t n = m - 2;
    std::vector<double> diag(n), sub(n), sup(n), rhs(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double h0 = t[j + 1] - t[j];
        const double h1 = t[j + 2] - t[j + 1];
        sub[j] = h0 / 6.0;
        diag[j] = (h0 + h1) / 3.0;
        sup[j] = h1 / 6.0;
        rhs[j] = (y[j + 2] - y[j + 1]) / h1 - (y[j + 1] - y[j]) / h0;
    }
    for (std::size_t j = 1; j < n; ++j) {
        const double w = sub[j] / diag[j - 1];
        diag[j] -= w * sup[j - 1];
        rhs[j] -= w * rhs[j - 1];
    }
    curv[n] = rhs[n - 1] / diag[n - 1];
    for (std::size_t j = n - 1; j >= 1; --j)
        curv[j] = (rhs[j - 1] - sup[j - 1] * curv[j + 1]) / diag[j - 1];
    return curv;
}

double eval_spline(const std::vector<double>& t, const std::vector<double>& y,
                   const std::vector<double>& curv, double x) {
    const std::size_t m = t.size();
    if (x <= t.front()) {
        const double h = t[1] - t[0];
        const double slope = (y[1] - y[0]) / h - h * curv[1] / 6.0;
        return y[0] + slope * (x - t[0]);
    }
    if (x >= t.back()) {
        const double h = t[m - 1] - t[m - 2];
        const double slope = (y[m - 1] - y[m - 2]) / h + h * curv[m - 2] / 6.0;
        return y[m - 1] + slope * (x - t[m - 1]);
    }
    const auto it = std::upper_bound(t.begin(), t.end(), x);
    const auto i = static_cast<std::size_t>(it - t.begin()) - 1;
    const double h = t[i + 1] - t[i];
    const double a = t[i + 1] - x;
    const double b = x - t[i];
    return curv[i] * a * a * a / (6.0 * h) + curv[i + 1] * b * b * b / (6.0 * h) +
           (y[i] / h - curv[i] * h / 6.0) * a +
           (y[i + 1] / h - curv[i + 1] * h / 6.0) * b;
}

}  // namespace

std::vector<double> natural_spline_knots(std::span<const double> values, int dof) {
    return make_knots(values, dof);
}

Eigen::MatrixXd natural_spline_basis(std::span<const double> values, int dof) {
    const std::vector<double> knots = make_knots(values, dof);
    const auto rows = static_cast<Eigen::Index>(values.size());
    const auto full = static_cast<Eigen::Index>(knots.size());
    Eigen::MatrixXd basis(rows, full);
    std::vector<double> unit(knots.size(), 0.0);
    for (Eigen::Index j = 0; j < full; ++j) {
        unit.assign(knots.size(), 0.0);
        unit[static_cast<std::size_t>(j)] = 1.0;
        const std::vector<double> curv = natural_second_derivs(knots, unit);
        for (Eigen::Index i = 0; i < rows; ++i)
            basis(i, j) = eval_spline(knots, unit, curv,
                                      std::log(values[static_cast<std::size_t>(i)]));
    }
    basis.rowwise() -= basis.colwise().mean();
    return basis.leftCols(full - 1);
}

}  // namespace ebsig

#include <cmath>

#include "ebsig/kernels.hpp"

namespace ebsig::kern {
namespace {

double s_sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double s_dot_gather(const double* a, const double* tab, const std::int32_t* idx,
                    std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * tab[idx[i]];
    return acc;
}

double s_sum_add_log(const double* m, const double* acc, std::size_t n) {
    double out = 0.0;
    for (std::size_t i = 0; i < n; ++i) out += m[i] + std::log(acc[i]);
    return out;
}

double s_fp_denom(const double* tau, const double* e, const double* cnt,
                  double r, double h, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += tau[i] * e[i] * (cnt[i] + r) / (1.0 + e[i] * h);
    return acc;
}

void s_axpy(double* y, const double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_vmax(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = src[i] > dst[i] ? src[i] : dst[i];
}

void s_recip(double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = 1.0 / dst[i];
}

void s_mul(double* dst, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] *= src[i];
}

void s_log1p_scale(double* dst, const double* e, double h, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::log1p(e[i] * h);
}

void s_exp_sub_store_add(double* lp, const double* m, double* acc, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        lp[i] = std::exp(lp[i] - m[i]);
        acc[i] += lp[i];
    }
}

void s_nb_logpmf(double* lp, const std::int32_t* idx, const double* tab,
                 const double* c0, const double* cnt, const double* l1p,
                 double A, double B, double r, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        lp[i] = A + tab[idx[i]] + c0[i] + cnt[i] * B - (r + cnt[i]) * l1p[i];
}

constexpr Ops kScalar = {
    "scalar",    s_sum,   s_dot,   s_dot_gather, s_sum_add_log,
    s_fp_denom,  s_axpy,  s_vmax,  s_recip,      s_mul,
    s_log1p_scale, s_exp_sub_store_add, s_nb_logpmf,
};

}  // namespace

const Ops& scalar_ops() { return kScalar; }

}  // namespace ebsig::kern
